#include "wpose/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <thread>
#include <vector>

#include "wpose/kernels.hpp"

namespace wpose {

namespace {

constexpr double kTruncSigmas = 4.0;  // mass beyond 4 sigma < 3.4e-4
constexpr std::uint32_t kDumpMagic = 0x4D485057;  // "WPHM" little-endian

struct Box {
  int x0, x1, y0, y1;  // half-open
  bool empty() const { return x0 >= x1 || y0 >= y1; }
};

Box clipped_box(double lo_x, double hi_x, double lo_y, double hi_y, int w, int h) {
  Box b;
  b.x0 = std::max(0, int(std::floor(lo_x)));
  b.x1 = std::min(w, int(std::ceil(hi_x)) + 1);
  b.y0 = std::max(0, int(std::floor(lo_y)));
  b.y1 = std::min(h, int(std::ceil(hi_y)) + 1);
  return b;
}

void encode_one_keypoint(float* map, const Vec2& kp, double sigma, int w, int h) {
  std::fill(map, map + std::size_t(w) * h, 0.0f);
  if (!(kp.x() >= 0 && kp.x() < w && kp.y() >= 0 && kp.y() < h)) return;
  const double r = kTruncSigmas * sigma;
  const Box box = clipped_box(kp.x() - r, kp.x() + r, kp.y() - r, kp.y() + r, w, h);
  if (box.empty()) return;
  const float inv_two_sigma_sq = float(1.0 / (2.0 * sigma * sigma));
  const auto& k = kernels::ops();
  for (int row = box.y0; row < box.y1; ++row) {
    const double dy = row - kp.y();
    k.gaussian_row(map + std::size_t(row) * w + box.x0, box.x1 - box.x0,
                   float(kp.x() - box.x0), float(dy * dy), inv_two_sigma_sq);
  }
}

void encode_one_connection(float* map, const Vec2& a, const Vec2& b,
                           double sigma, int w, int h) {
  std::fill(map, map + std::size_t(w) * h, 0.0f);
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  if (len2 < 1e-18) {  // degenerate segment: same as a keypoint bump
    encode_one_keypoint(map, a, sigma, w, h);
    return;
  }
  const double r = kTruncSigmas * sigma;
  const Box box = clipped_box(std::min(a.x(), b.x()) - r, std::max(a.x(), b.x()) + r,
                              std::min(a.y(), b.y()) - r, std::max(a.y(), b.y()) + r,
                              w, h);
  if (box.empty()) return;
  const double inv_len2 = 1.0 / len2;
  const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
  const double r2 = r * r;
  for (int row = box.y0; row < box.y1; ++row) {
    float* dst = map + std::size_t(row) * w;
    for (int col = box.x0; col < box.x1; ++col) {
      const Vec2 p(col, row);
      const double t = std::clamp((p - a).dot(d) * inv_len2, 0.0, 1.0);
      const double dist2 = (p - (a + t * d)).squaredNorm();
      if (dist2 > r2) continue;
      dst[col] = float(std::exp(-dist2 * inv_two_sigma_sq));
    }
  }
}

// Deterministic map-level parallelism: each worker owns a fixed stripe of
// map indices, so the output never depends on scheduling.
void for_each_map(int count, int n_threads, const std::function<void(int)>& fn) {
  if (n_threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const int workers = std::min(n_threads, count);
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += workers) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

HeatmapStack encode_keypoint_maps(const Skeleton2D& skel, double sigma,
                                  int width, int height, int n_threads) {
  if (!(sigma > 0)) throw std::invalid_argument("sigma must be > 0");
  HeatmapStack stack;
  stack.width = width;
  stack.height = height;
  stack.sigma = sigma;
  stack.keypoint_maps.resize(std::size_t(kKeypointCount) * width * height);
  for_each_map(kKeypointCount, n_threads, [&](int k) {
    encode_one_keypoint(stack.keypoint_map(k), skel.coords[k], sigma, width, height);
  });
  return stack;
}

void encode_connection_maps(HeatmapStack& stack, const Skeleton2D& skel,
                            const Topology& topo, int n_threads) {
  if (!(stack.sigma > 0)) throw std::invalid_argument("sigma must be > 0");
  stack.connection_maps.resize(std::size_t(kConnectionCount) * stack.width * stack.height);
  for_each_map(kConnectionCount, n_threads, [&](int c) {
    const auto& [a, b] = topo.connections[c];
    encode_one_connection(stack.connection_map(c), skel.coords[a], skel.coords[b],
                          stack.sigma, stack.width, stack.height);
  });
}

Decoded2D soft_argmax(const float* map, int width, int height) {
  double mass = 0, mu = 0, mv = 0;
  float max_raw = 0;
  kernels::ops().softargmax_sums(map, width, height, &mass, &mu, &mv, &max_raw);
  if (!(mass > 0)) throw EmptyMap("soft_argmax: no positive values in map");
  Decoded2D out;
  out.u = mu / mass;
  out.v = mv / mass;
  out.confidence = std::clamp(double(max_raw), 0.0, 1.0);
  return out;
}

PixelIndex hard_argmax(const float* map, int width, int height) {
  const std::size_t n = std::size_t(width) * height;
  std::size_t best = 0;
  float best_val = map[0];
  bool any_positive = map[0] > 0.0f;
  for (std::size_t i = 1; i < n; ++i) {
    if (map[i] > best_val) {
      best_val = map[i];
      best = i;
    }
    any_positive |= map[i] > 0.0f;
  }
  if (!any_positive) throw EmptyMap("hard_argmax: no positive values in map");
  return {int(best % width), int(best / width)};
}

double integral_loss(const Skeleton2D& pred, const Skeleton2D& gt) {
  double acc = 0;
  for (int k = 0; k < kKeypointCount; ++k) {
    acc += std::abs(pred.coords[k].x() - gt.coords[k].x());
    acc += std::abs(pred.coords[k].y() - gt.coords[k].y());
  }
  return acc / (2.0 * kKeypointCount);
}

double heatmap_mse(const HeatmapStack& pred, const HeatmapStack& gt) {
  if (pred.width != gt.width || pred.height != gt.height ||
      pred.keypoint_maps.size() != gt.keypoint_maps.size() ||
      pred.connection_maps.size() != gt.connection_maps.size())
    throw std::invalid_argument("heatmap_mse: shape mismatch");
  const auto& k = kernels::ops();
  const std::size_t nk = pred.keypoint_maps.size();
  const std::size_t nc = pred.connection_maps.size();
  const double sum_k = k.mse(pred.keypoint_maps.data(), gt.keypoint_maps.data(), nk) * double(nk);
  const double sum_c = nc ? k.mse(pred.connection_maps.data(), gt.connection_maps.data(), nc) * double(nc) : 0.0;
  return (sum_k + sum_c) / double(nk + nc);
}

void save_heatmap_dump(const HeatmapStack& stack, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write heatmap dump: " + path);
  const std::uint32_t header[5] = {kDumpMagic, kKeypointCount, kConnectionCount,
                                   std::uint32_t(stack.height),
                                   std::uint32_t(stack.width)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(stack.keypoint_maps.data()),
            std::streamsize(stack.keypoint_maps.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(stack.connection_maps.data()),
            std::streamsize(stack.connection_maps.size() * sizeof(float)));
}

HeatmapStack load_heatmap_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open heatmap dump: " + path);
  std::uint32_t header[5];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || header[0] != kDumpMagic)
    throw std::runtime_error("bad heatmap dump header: " + path);
  HeatmapStack stack;
  const std::uint32_t k = header[1], c = header[2];
  stack.height = int(header[3]);
  stack.width = int(header[4]);
  stack.sigma = 0;  // encode-time parameter, not carried by the dump
  stack.keypoint_maps.resize(std::size_t(k) * stack.width * stack.height);
  stack.connection_maps.resize(std::size_t(c) * stack.width * stack.height);
  in.read(reinterpret_cast<char*>(stack.keypoint_maps.data()),
          std::streamsize(stack.keypoint_maps.size() * sizeof(float)));
  in.read(reinterpret_cast<char*>(stack.connection_maps.data()),
          std::streamsize(stack.connection_maps.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated heatmap dump: " + path);
  return stack;
}

}  // namespace wpose
