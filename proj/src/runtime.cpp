#include "wpose/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace wpose::rt {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

ReplayDetector::ReplayDetector(std::vector<Skeleton2D> stream)
    : stream_(std::move(stream)) {}

Skeleton2D ReplayDetector::detect(const ModelInput&, std::size_t frame_index) {
  if (frame_index >= stream_.size()) {
    std::ostringstream msg;
    msg << "replay detector exhausted at frame " << frame_index << " (have "
        << stream_.size() << ")";
    throw DetectorFailure(msg.str());
  }
  return stream_[frame_index];
}

struct StreamDetector::Impl {
  std::ifstream in;
  bool header_done = false;
};

StreamDetector::StreamDetector(const std::string& path) : impl_(new Impl) {
  impl_->in.open(path);
  if (!impl_->in)
    throw ConfigError("external-stream detector: cannot open " + path);
}

StreamDetector::~StreamDetector() = default;

Skeleton2D StreamDetector::detect(const ModelInput&, std::size_t frame_index) {
  if (!impl_->header_done) {
    try {
      read_2d_header(impl_->in);
    } catch (const SequenceIoError& e) {
      throw DetectorFailure(std::string("external stream: ") + e.what());
    }
    impl_->header_done = true;
  }
  Skeleton2D out;
  try {
    if (!read_2d_record(impl_->in, out)) {
      std::ostringstream msg;
      msg << "external stream ended before frame " << frame_index;
      throw DetectorFailure(msg.str());
    }
  } catch (const SequenceIoError& e) {
    std::ostringstream msg;
    msg << "external stream, frame " << frame_index << ": " << e.what();
    throw DetectorFailure(msg.str());
  }
  return out;
}

Pipeline::Pipeline(CameraRig rig, LifterModel model,
                   std::unique_ptr<Detector> detector, PipelineOptions options)
    : rig_(std::move(rig)),
      model_(std::move(model)),
      detector_(std::move(detector)),
      options_(options),
      filter_(options.filter.config) {
  rig_.validate();
  if (!detector_) throw ConfigError("pipeline: no detector");
  if (options_.variant == LifterVariant::projection_residual &&
      model_.input_width != 3 * kKeypointCount)
    throw ConfigError("pipeline: projection-residual variant needs a 17x3 model");
}

namespace {

// Depth lookup at detected keypoints from the raw frames (nearest pixel).
void sample_depth_from_frames(Skeleton2D& det, const FramePair& fp,
                              const CameraRig& rig, const Topology& topo) {
  const auto split = split_concat_coords(det, topo, rig.posture.height);
  for (int k = 0; k < kKeypointCount; ++k) {
    const auto& frame = split[k].camera == CameraId::posture ? fp.posture_depth
                                                             : fp.gait_depth;
    const int x = std::clamp(int(std::lround(split[k].pixel.x())), 0, kCamWidth - 1);
    const int y = std::clamp(int(std::lround(split[k].pixel.y())), 0, kCamHeight - 1);
    det.depth_at_kp[k] = frame[std::size_t(y) * kCamWidth + x] / 1000.0;
  }
}

}  // namespace

Skeleton3D Pipeline::process(const FramePair& frame, std::size_t frame_index,
                             StageTimings* timings) {
  const Topology& topo = default_topology();
  StageTimings t;

  auto t0 = Clock::now();
  const ModelInput input = preprocess(frame, kModelWidth, kModelHeight,
                                      options_.depth_max);
  t.preprocess_ms = ms_since(t0);

  t0 = Clock::now();
  Skeleton2D det = detector_->detect(input, frame_index);
  det.timestamp = frame.timestamp;
  if (options_.lookup_depth_from_frames)
    sample_depth_from_frames(det, frame, rig_, topo);
  t.detect_ms = ms_since(t0);

  t0 = Clock::now();
  Skeleton3D out;
  if (options_.variant == LifterVariant::projection_residual) {
    out = projection_residual_forward(det, rig_, model_, topo);
  } else {
    const auto inputs = make_lift_input(det, options_.variant, rig_, topo,
                                        options_.depth_max);
    const auto rel = lifter_forward(model_, inputs);
    // absolute recomposition: backprojected pelvis when any depth is live
    Vec3 pelvis = last_pelvis_;
    try {
      pelvis = rough_backprojection(det, rig_, topo).coords[topo.root_index];
      last_pelvis_ = pelvis;
    } catch (const AllDepthDead&) {
      // keep the previous pelvis estimate
    }
    out.timestamp = frame.timestamp;
    for (int k = 0; k < kKeypointCount; ++k)
      out.coords[k] = pelvis + rel[k] - rel[topo.root_index];
  }
  t.lift_ms = ms_since(t0);

  t0 = Clock::now();
  if (options_.filter.enabled) out = filter_.filter(out);
  t.filter_ms = ms_since(t0);

  t.total_ms = t.preprocess_ms + t.detect_ms + t.lift_ms + t.filter_ms;
  if (t.total_ms > options_.budget_ms) {
    ++overruns_;
    if (overruns_ <= 3)
      std::cerr << "wpose: frame " << frame_index << " took " << t.total_ms
                << " ms (budget " << options_.budget_ms << " ms)\n";
  }
  if (timings) *timings = t;
  return out;
}

// ----------------------------------------------------------- threaded run

namespace {

template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  // Returns the index of a dropped item when keep-latest overflows.
  std::optional<std::size_t> push(T item, bool drop_when_full) {
    std::unique_lock lock(mu_);
    std::optional<std::size_t> dropped;
    if (drop_when_full) {
      if (items_.size() >= capacity_) {
        dropped = items_.front().first;
        items_.pop_front();
      }
    } else {
      not_full_.wait(lock, [&] { return items_.size() < capacity_; });
    }
    items_.emplace_back(std::move(item));
    lock.unlock();
    not_empty_.notify_one();
    return dropped;
  }

  bool pop(T& out) {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return false;
    out = std::move(items_.front());
    items_.pop_front();
    lock.unlock();
    not_full_.notify_one();
    return true;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  bool closed_ = false;
};

}  // namespace

RunStats run_stream(Pipeline& pipeline, const FrameSource& source,
                    const SkeletonSink& sink, const RunOptions& options) {
  RunStats stats;

  if (!options.threaded) {
    FramePair frame;
    for (std::size_t i = 0;; ++i) {
      if (!source(i, frame)) break;
      ++stats.frames_in;
      StageTimings t;
      const Skeleton3D out =
          pipeline.process(frame, i, options.record_timings ? &t : nullptr);
      if (options.record_timings) stats.timings.push_back(t);
      sink(i, out);
      ++stats.frames_out;
    }
    stats.overruns = pipeline.budget_overruns();
    return stats;
  }

  using Item = std::pair<std::size_t, FramePair>;
  BoundedQueue<Item> queue(options.queue_capacity);
  std::exception_ptr worker_error;
  std::mutex err_mu;

  std::thread consumer([&] {
    try {
      Item item;
      while (queue.pop(item)) {
        StageTimings t;
        const Skeleton3D out = pipeline.process(
            item.second, item.first, options.record_timings ? &t : nullptr);
        if (options.record_timings) stats.timings.push_back(t);
        sink(item.first, out);
        ++stats.frames_out;
      }
    } catch (...) {
      std::lock_guard lock(err_mu);
      worker_error = std::current_exception();
      // drain so the producer cannot deadlock on a full queue
      Item item;
      while (queue.pop(item)) ++stats.dropped;
    }
  });

  {
    FramePair frame;
    for (std::size_t i = 0;; ++i) {
      {
        std::lock_guard lock(err_mu);
        if (worker_error) break;
      }
      if (!source(i, frame)) break;
      ++stats.frames_in;
      if (auto dropped = queue.push({i, frame}, options.drop_when_full)) {
        ++stats.dropped;
        (void)*dropped;
      }
    }
  }
  queue.close();
  consumer.join();
  if (worker_error) std::rethrow_exception(worker_error);
  stats.overruns = pipeline.budget_overruns();
  return stats;
}

BenchReport bench(Pipeline& pipeline, const FrameSource& source,
                  std::size_t n_frames) {
  if (n_frames < 100)
    throw std::invalid_argument("bench: need at least 100 frames");
  constexpr std::size_t kWarmup = 10;
  std::vector<double> pre, det, lift, filt, total, nondet;
  pre.reserve(n_frames);

  FramePair frame;
  for (std::size_t i = 0; i < n_frames; ++i) {
    if (!source(i, frame)) break;
    StageTimings t;
    (void)pipeline.process(frame, i, &t);
    if (i < kWarmup) continue;
    pre.push_back(t.preprocess_ms);
    det.push_back(t.detect_ms);
    lift.push_back(t.lift_ms);
    filt.push_back(t.filter_ms);
    total.push_back(t.total_ms);
    nondet.push_back(t.preprocess_ms + t.lift_ms + t.filter_ms);
  }

  BenchReport rep;
  rep.frames = total.size();
  rep.budget_ms = pipeline.options().budget_ms;
  rep.preprocess = metrics::latency_stats(pre);
  rep.detect = metrics::latency_stats(det);
  rep.lift = metrics::latency_stats(lift);
  rep.filter = metrics::latency_stats(filt);
  rep.end_to_end = metrics::latency_stats(total);
  rep.non_detector = metrics::latency_stats(nondet);
  rep.budget_ok = rep.end_to_end.p95 < rep.budget_ms;
  return rep;
}

std::string to_text(const BenchReport& rep) {
  std::ostringstream out;
  char buf[160];
  out << "frames measured: " << rep.frames << " (10 warm-up excluded)\n";
  auto row = [&](const char* name, const metrics::LatencyStats& s) {
    std::snprintf(buf, sizeof(buf),
                  "%-12s mean %8.3f ms  std %7.3f  se %7.4f  p50 %8.3f  p95 %8.3f\n",
                  name, s.mean, s.stddev, s.se, s.p50, s.p95);
    out << buf;
  };
  row("preprocess", rep.preprocess);
  row("detect", rep.detect);
  row("lift", rep.lift);
  row("filter", rep.filter);
  row("non-detector", rep.non_detector);
  row("end-to-end", rep.end_to_end);
  std::snprintf(buf, sizeof(buf), "budget: p95 %.3f ms %s %.1f ms -> %s\n",
                rep.end_to_end.p95, rep.budget_ok ? "<" : ">=", rep.budget_ms,
                rep.budget_ok ? "OK" : "EXCEEDED");
  out << buf;
  return out.str();
}

}  // namespace wpose::rt
