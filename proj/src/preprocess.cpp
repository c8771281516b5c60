#include "wpose/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wpose/kernels.hpp"

namespace wpose {

namespace fs = std::filesystem;

FramePair FramePair::blank(double timestamp) {
  FramePair fp;
  fp.posture_rgb.assign(std::size_t(kCamWidth) * kCamHeight * 3, 0);
  fp.posture_depth.assign(std::size_t(kCamWidth) * kCamHeight, 0);
  fp.gait_rgb.assign(std::size_t(kCamWidth) * kCamHeight * 3, 0);
  fp.gait_depth.assign(std::size_t(kCamWidth) * kCamHeight, 0);
  fp.timestamp = timestamp;
  return fp;
}

namespace {

struct AxisFootprint {
  int start = 0;
  std::vector<double> weights;
};

std::vector<AxisFootprint> area_footprints(int src, int dst) {
  const double scale = double(src) / double(dst);
  std::vector<AxisFootprint> out(dst);
  for (int t = 0; t < dst; ++t) {
    const double lo = t * scale;
    const double hi = (t + 1) * scale;
    const int c0 = std::max(0, int(std::floor(lo)));
    const int c1 = std::min(src, int(std::ceil(hi)));
    out[t].start = c0;
    out[t].weights.resize(std::size_t(c1 - c0));
    for (int c = c0; c < c1; ++c)
      out[t].weights[std::size_t(c - c0)] =
          std::min<double>(c + 1, hi) - std::max<double>(c, lo);
  }
  return out;
}

}  // namespace

void area_resize(const float* src, int src_w, int src_h, float* dst,
                 int dst_w, int dst_h) {
  const auto cols = area_footprints(src_w, dst_w);
  const auto rows = area_footprints(src_h, dst_h);
  const double inv_area = double(dst_w) * dst_h / (double(src_w) * src_h);
  std::vector<float> band(static_cast<std::size_t>(src_w));
  const auto& k = kernels::ops();
  for (int ty = 0; ty < dst_h; ++ty) {
    std::fill(band.begin(), band.end(), 0.0f);
    const AxisFootprint& fr = rows[ty];
    for (std::size_t i = 0; i < fr.weights.size(); ++i)
      k.saxpy(float(fr.weights[i]), src + std::size_t(fr.start + i) * src_w,
              band.data(), src_w);
    float* out_row = dst + std::size_t(ty) * dst_w;
    for (int tx = 0; tx < dst_w; ++tx) {
      const AxisFootprint& fc = cols[tx];
      double acc = 0;
      for (std::size_t i = 0; i < fc.weights.size(); ++i)
        acc += fc.weights[i] * double(band[std::size_t(fc.start) + i]);
      out_row[tx] = float(std::clamp(acc * inv_area, 0.0, 1.0));
    }
  }
}

void nearest_resize(const float* src, int src_w, int src_h, float* dst,
                    int dst_w, int dst_h) {
  const double sx = double(src_w) / dst_w;
  const double sy = double(src_h) / dst_h;
  for (int ty = 0; ty < dst_h; ++ty) {
    const int sy_i = std::min(src_h - 1, int((ty + 0.5) * sy));
    const float* src_row = src + std::size_t(sy_i) * src_w;
    float* out_row = dst + std::size_t(ty) * dst_w;
    for (int tx = 0; tx < dst_w; ++tx)
      out_row[tx] = src_row[std::min(src_w - 1, int((tx + 0.5) * sx))];
  }
}

ModelInput preprocess(const FramePair& fp, int target_w, int target_h,
                      double depth_max) {
  const std::size_t npx = std::size_t(kCamWidth) * kCamHeight;
  if (fp.posture_rgb.size() != npx * 3 || fp.gait_rgb.size() != npx * 3 ||
      fp.posture_depth.size() != npx || fp.gait_depth.size() != npx) {
    std::ostringstream msg;
    msg << "preprocess: frame sizes disagree (expected " << kCamWidth << "x"
        << kCamHeight << " for all four frames)";
    throw ShapeMismatch(msg.str());
  }

  const auto& k = kernels::ops();

  // Concatenated planes, posture stacked above gait.
  std::vector<float> gray(npx * 2);
  std::vector<float> depth(npx * 2);
  k.rgb_to_gray_unit(fp.posture_rgb.data(), gray.data(), int(npx));
  k.rgb_to_gray_unit(fp.gait_rgb.data(), gray.data() + npx, int(npx));
  const float scale = float(1.0 / (depth_max * 1000.0));
  k.depth_mm_to_unit(fp.posture_depth.data(), depth.data(), int(npx), scale);
  k.depth_mm_to_unit(fp.gait_depth.data(), depth.data() + npx, int(npx), scale);

  ModelInput mi;
  mi.width = target_w;
  mi.height = target_h;
  mi.timestamp = fp.timestamp;
  mi.gray.resize(std::size_t(target_w) * target_h);
  mi.depth.resize(std::size_t(target_w) * target_h);
  area_resize(gray.data(), kCamWidth, kConcatHeight, mi.gray.data(), target_w, target_h);
  nearest_resize(depth.data(), kCamWidth, kConcatHeight, mi.depth.data(), target_w, target_h);
  return mi;
}

std::vector<std::size_t> downsample_sequence(const std::vector<double>& timestamps,
                                             double source_hz, double target_hz) {
  if (timestamps.empty()) throw EmptySequence("downsample: no timestamps");
  if (!(target_hz > 0) || target_hz > source_hz)
    throw std::invalid_argument("downsample: need 0 < target_hz <= source_hz");
  const double t0 = timestamps.front();
  const double span = timestamps.back() - t0;
  const std::size_t n_ticks = std::size_t(std::floor(span * target_hz + 1e-9)) + 1;
  std::vector<std::size_t> out;
  out.reserve(n_ticks);
  for (std::size_t k = 0; k < n_ticks; ++k) {
    const double tick = t0 + double(k) / target_hz;
    auto it = std::lower_bound(timestamps.begin(), timestamps.end(), tick);
    std::size_t idx;
    if (it == timestamps.end())
      idx = timestamps.size() - 1;
    else {
      idx = std::size_t(it - timestamps.begin());
      if (idx > 0 && tick - timestamps[idx - 1] <= timestamps[idx] - tick)
        --idx;  // ties go to the earlier frame
    }
    if (out.empty() || idx > out.back()) out.push_back(idx);
  }
  return out;
}

Vec2 coord_rescale(const Vec2& px, int target_w, int target_h, int src_w,
                   int src_h) {
  return {px.x() * double(target_w) / src_w, px.y() * double(target_h) / src_h};
}

Vec2 coord_rescale_inverse(const Vec2& px, int target_w, int target_h,
                           int src_w, int src_h) {
  return {px.x() * double(src_w) / target_w, px.y() * double(src_h) / target_h};
}

namespace {

std::string blob_path(const std::string& dir, std::size_t index, const char* tag) {
  char name[64];
  std::snprintf(name, sizeof(name), "%06zu_%s.bin", index, tag);
  return (fs::path(dir) / name).string();
}

std::vector<std::uint8_t> read_blob_u8(const std::string& path, std::size_t expect) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open frame blob: " + path);
  std::vector<std::uint8_t> data(expect);
  in.read(reinterpret_cast<char*>(data.data()), std::streamsize(expect));
  if (std::size_t(in.gcount()) != expect)
    throw std::runtime_error("short frame blob: " + path);
  return data;
}

}  // namespace

FrameDirSource::FrameDirSource(const std::string& dir) : dir_(dir) {
  std::ifstream in((fs::path(dir) / "timestamps.csv").string());
  if (!in)
    throw std::runtime_error("frame dir missing timestamps.csv: " + dir);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::size_t idx;
    double t;
    if (std::sscanf(line.c_str(), "%zu,%lf", &idx, &t) != 2)
      throw std::runtime_error("bad timestamps.csv line: " + line);
    timestamps_.push_back(t);
  }
  if (timestamps_.empty()) throw EmptySequence("frame dir is empty: " + dir);
}

FramePair FrameDirSource::frame(std::size_t i) const {
  const std::size_t npx = std::size_t(kCamWidth) * kCamHeight;
  FramePair fp;
  fp.timestamp = timestamps_.at(i);
  const auto pg = read_blob_u8(blob_path(dir_, i, "pgray"), npx);
  const auto gg = read_blob_u8(blob_path(dir_, i, "ggray"), npx);
  const auto pd = read_blob_u8(blob_path(dir_, i, "pdepth"), npx * 2);
  const auto gd = read_blob_u8(blob_path(dir_, i, "gdepth"), npx * 2);
  fp.posture_rgb.resize(npx * 3);
  fp.gait_rgb.resize(npx * 3);
  for (std::size_t p = 0; p < npx; ++p) {
    fp.posture_rgb[3 * p] = fp.posture_rgb[3 * p + 1] = fp.posture_rgb[3 * p + 2] = pg[p];
    fp.gait_rgb[3 * p] = fp.gait_rgb[3 * p + 1] = fp.gait_rgb[3 * p + 2] = gg[p];
  }
  fp.posture_depth.resize(npx);
  fp.gait_depth.resize(npx);
  for (std::size_t p = 0; p < npx; ++p) {
    fp.posture_depth[p] = std::uint16_t(pd[2 * p] | (pd[2 * p + 1] << 8));
    fp.gait_depth[p] = std::uint16_t(gd[2 * p] | (gd[2 * p + 1] << 8));
  }
  return fp;
}

void write_frame_dir(const std::string& dir, const std::vector<FramePair>& frames) {
  fs::create_directories(dir);
  std::ofstream ts((fs::path(dir) / "timestamps.csv").string());
  if (!ts) throw std::runtime_error("cannot write timestamps.csv in " + dir);
  const std::size_t npx = std::size_t(kCamWidth) * kCamHeight;
  std::vector<std::uint8_t> gray(npx);
  std::vector<std::uint8_t> depth(npx * 2);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const FramePair& fp = frames[i];
    char line[64];
    std::snprintf(line, sizeof(line), "%06zu,%.9g\n", i, fp.timestamp);
    ts << line;
    auto write_gray = [&](const std::vector<std::uint8_t>& rgb, const char* tag) {
      for (std::size_t p = 0; p < npx; ++p) {
        const double y = 0.299 * rgb[3 * p] + 0.587 * rgb[3 * p + 1] + 0.114 * rgb[3 * p + 2];
        gray[p] = std::uint8_t(std::lround(std::min(255.0, y)));
      }
      std::ofstream out(blob_path(dir, i, tag), std::ios::binary);
      out.write(reinterpret_cast<const char*>(gray.data()), std::streamsize(npx));
    };
    auto write_depth = [&](const std::vector<std::uint16_t>& d, const char* tag) {
      for (std::size_t p = 0; p < npx; ++p) {
        depth[2 * p] = std::uint8_t(d[p] & 0xff);
        depth[2 * p + 1] = std::uint8_t(d[p] >> 8);
      }
      std::ofstream out(blob_path(dir, i, tag), std::ios::binary);
      out.write(reinterpret_cast<const char*>(depth.data()), std::streamsize(npx * 2));
    };
    write_gray(fp.posture_rgb, "pgray");
    write_gray(fp.gait_rgb, "ggray");
    write_depth(fp.posture_depth, "pdepth");
    write_depth(fp.gait_depth, "gdepth");
  }
}

}  // namespace wpose
