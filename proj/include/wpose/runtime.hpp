#pragma once
// Streaming pipeline: preprocess -> detector -> lift -> filter, with a
// pluggable detector seam, bounded-queue threading and latency
// accounting. Inline and threaded execution produce identical skeletons.

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "wpose/geometry.hpp"
#include "wpose/lifter.hpp"
#include "wpose/metrics.hpp"
#include "wpose/one_euro.hpp"
#include "wpose/preprocess.hpp"
#include "wpose/skeleton.hpp"

namespace wpose::rt {

struct DetectorFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Behavioral contract for the 2D stage: consume a preprocessed input,
// return keypoints in concatenated-frame (640x960) coordinates with a
// declared per-call latency budget.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual Skeleton2D detect(const ModelInput& input, std::size_t frame_index) = 0;
  virtual double latency_budget_ms() const { return 45.0; }
  virtual std::string name() const = 0;
};

// Reference detector: replays a prepared detection stream (the synthetic
// detector output) by frame index.
class ReplayDetector final : public Detector {
 public:
  explicit ReplayDetector(std::vector<Skeleton2D> stream);
  Skeleton2D detect(const ModelInput&, std::size_t frame_index) override;
  std::string name() const override { return "synthetic"; }

 private:
  std::vector<Skeleton2D> stream_;
};

// External detector adapter: reads 2D skeleton records (sequence wire
// format) from a file or named pipe, one record per frame in order.
class StreamDetector final : public Detector {
 public:
  explicit StreamDetector(const std::string& path);
  ~StreamDetector() override;
  Skeleton2D detect(const ModelInput&, std::size_t frame_index) override;
  std::string name() const override { return "external-stream"; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct FilterOptions {
  bool enabled = true;
  OneEuroConfig config;
};

struct StageTimings {
  double preprocess_ms = 0, detect_ms = 0, lift_ms = 0, filter_ms = 0;
  double total_ms = 0;
};

struct PipelineOptions {
  LifterVariant variant = LifterVariant::default_lifting;
  FilterOptions filter;
  double depth_max = 10.0;
  bool lookup_depth_from_frames = false;  // sample depth at keypoints from frames
  double budget_ms = 53.0;                // per-frame end-to-end budget
};

class Pipeline {
 public:
  Pipeline(CameraRig rig, LifterModel model, std::unique_ptr<Detector> detector,
           PipelineOptions options);

  // Full per-frame pass in calling-thread order. Budget overruns are
  // counted, not fatal; detector errors propagate as DetectorFailure.
  Skeleton3D process(const FramePair& frame, std::size_t frame_index,
                     StageTimings* timings = nullptr);

  std::size_t budget_overruns() const { return overruns_; }
  const PipelineOptions& options() const { return options_; }
  Detector& detector() { return *detector_; }

 private:
  CameraRig rig_;
  LifterModel model_;
  std::unique_ptr<Detector> detector_;
  PipelineOptions options_;
  SkeletonFilter filter_;
  Vec3 last_pelvis_ = Vec3::Zero();  // absolute-pose fallback when depth dies
  std::size_t overruns_ = 0;
};

// Pull-based frame source: fill the frame for the given index, return
// false at end of stream.
using FrameSource = std::function<bool(std::size_t index, FramePair& out)>;
using SkeletonSink = std::function<void(std::size_t index, const Skeleton3D&)>;

struct RunStats {
  std::size_t frames_in = 0, frames_out = 0;
  std::size_t dropped = 0;   // keep-latest overflow drops (threaded mode)
  std::size_t overruns = 0;  // frames over the latency budget
  std::vector<StageTimings> timings;
};

struct RunOptions {
  bool threaded = false;
  std::size_t queue_capacity = 8;
  bool drop_when_full = false;  // false: block (lossless), true: keep latest
  bool record_timings = false;
};

// Drives the pipeline over a source. Output order equals input order;
// every input index is either delivered to the sink or counted in
// `dropped` — nothing vanishes silently.
RunStats run_stream(Pipeline& pipeline, const FrameSource& source,
                    const SkeletonSink& sink, const RunOptions& options = {});

struct BenchReport {
  metrics::LatencyStats preprocess, detect, lift, filter, end_to_end;
  metrics::LatencyStats non_detector;  // preprocess + lift + filter
  std::size_t frames = 0;
  double budget_ms = 53.0;
  bool budget_ok = false;  // p95 end-to-end under budget
};

// Warm-up of 10 frames excluded from the statistics. n_frames >= 100.
BenchReport bench(Pipeline& pipeline, const FrameSource& source,
                  std::size_t n_frames);
std::string to_text(const BenchReport& report);

}  // namespace wpose::rt
