// wpose: multi-camera 3D pose toolkit CLI.
// Verbs: gen, train, eval, filter, run, bench, calib-check.
// Exit codes: 0 ok, 2 config/usage error, 3 runtime stage failure.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wpose/geometry.hpp"
#include "wpose/lifter.hpp"
#include "wpose/metrics.hpp"
#include "wpose/one_euro.hpp"
#include "wpose/runtime.hpp"
#include "wpose/skeleton.hpp"
#include "wpose/synthgait.hpp"

namespace {

using namespace wpose;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

LifterVariant parse_variant(const std::string& name) {
  if (name == "default") return LifterVariant::default_lifting;
  if (name == "baseline") return LifterVariant::baseline;
  if (name == "projection-residual") return LifterVariant::projection_residual;
  throw rt::ConfigError("unknown variant: " + name);
}

synth::NoiseModel parse_noise_preset(const std::string& name) {
  if (name == "clean") return synth::NoiseModel::clean();
  if (name == "paper-like") return synth::NoiseModel::paper_like();
  throw rt::ConfigError("unknown noise preset: " + name);
}

struct RunSetup {
  CameraRig rig;
  LifterModel model;
  rt::PipelineOptions options;
  std::unique_ptr<rt::Detector> detector;
  rt::FrameSource source;
  std::size_t n_frames = 0;
  // keeps the synthetic scenario alive for the frame source closure
  std::shared_ptr<synth::SyntheticSequence> seq;
  std::shared_ptr<FrameDirSource> frame_dir;
};

RunSetup load_run_setup(const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) throw rt::ConfigError("cannot open config: " + config_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw rt::ConfigError(config_path + ": " + e.what());
  }

  RunSetup setup;
  try {
    setup.rig = load_calibration(j.at("calibration").get<std::string>());
    setup.model = load_model(j.at("model").get<std::string>());
    setup.options.variant = parse_variant(j.value("variant", "default"));
    setup.options.budget_ms = j.value("budget_ms", 53.0);
    setup.options.depth_max = j.value("depth_max", 10.0);
    setup.options.lookup_depth_from_frames =
        j.value("lookup_depth_from_frames", false);
    if (j.contains("filter")) {
      const auto& f = j["filter"];
      setup.options.filter.enabled = f.value("enabled", true);
      setup.options.filter.config.fc_min = f.value("fc_min", 1.5);
      setup.options.filter.config.beta = f.value("beta", 0.15);
      setup.options.filter.config.d_cutoff = f.value("d_cutoff", 1.0);
    }

    const auto& src = j.at("source");
    const std::string src_type = src.at("type").get<std::string>();
    if (src_type == "synthetic") {
      synth::GaitParams params = synth::default_params(
          src.value("scale", 1.0), src.value("speed", 0.5),
          src.value("seed", std::uint64_t(7)));
      params.duration_s = src.value("duration", 40.0);
      params.rate_hz = src.value("rate", 30.0);
      const auto noise = parse_noise_preset(src.value("noise", "paper-like"));
      auto seq = std::make_shared<synth::SyntheticSequence>(
          synth::generate_sequence(params));
      if (noise.body_thickness)
        seq->body_offset_m = synth::draw_body_offsets(params.seed);
      synth::render_observations(*seq, setup.rig, noise, params.seed);
      setup.seq = seq;
      setup.n_frames = seq->gt.size();
      const CameraRig rig = setup.rig;
      setup.source = [seq, rig](std::size_t i, FramePair& out) {
        if (i >= seq->gt.size()) return false;
        out = synth::render_frame_pair(*seq, i, rig);
        return true;
      };
    } else if (src_type == "frame-dir") {
      auto dir = std::make_shared<FrameDirSource>(src.at("dir").get<std::string>());
      setup.frame_dir = dir;
      setup.n_frames = dir->size();
      setup.source = [dir](std::size_t i, FramePair& out) {
        if (i >= dir->size()) return false;
        out = dir->frame(i);
        return true;
      };
    } else {
      throw rt::ConfigError("unknown source type: " + src_type);
    }

    const auto& det = j.at("detector");
    const std::string det_type = det.at("type").get<std::string>();
    if (det_type == "synthetic") {
      if (!setup.seq)
        throw rt::ConfigError("synthetic detector requires a synthetic source");
      setup.detector = std::make_unique<rt::ReplayDetector>(
          synth::synthetic_detector(*setup.seq, setup.rig));
    } else if (det_type == "external-stream") {
      setup.detector =
          std::make_unique<rt::StreamDetector>(det.at("path").get<std::string>());
    } else {
      throw rt::ConfigError("unknown detector type: " + det_type);
    }
  } catch (const nlohmann::json::exception& e) {
    throw rt::ConfigError(std::string("config: ") + e.what());
  }
  return setup;
}

int cmd_gen(const std::string& out_dir, const std::string& subjects,
            const std::string& speeds_csv, int repeats, double duration,
            double rate, const std::string& noise_preset, std::uint64_t seed,
            bool verbose) {
  synth::DatasetSpec spec;
  if (std::sscanf(subjects.c_str(), "%d,%d,%d", &spec.n_train, &spec.n_val,
                  &spec.n_test) != 3)
    throw rt::ConfigError("--subjects expects train,val,test counts");
  spec.speeds.clear();
  std::stringstream ss(speeds_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) spec.speeds.push_back(std::stod(tok));
  if (spec.speeds.empty()) throw rt::ConfigError("--speeds is empty");
  spec.repeats = repeats;
  spec.duration_s = duration;
  spec.rate_hz = rate;
  spec.noise = parse_noise_preset(noise_preset);
  spec.seed = seed;

  const synth::Dataset ds = synth::generate_dataset(spec);
  synth::save_dataset(ds, out_dir);
  if (verbose)
    std::cerr << "wrote " << ds.trials.size() << " trials for "
              << ds.subjects.size() << " subjects to " << out_dir << "\n";
  return kExitOk;
}

int cmd_train(const std::string& data_dir, const std::string& out_path,
              int epochs, int batch, double lr, std::uint64_t seed,
              const std::string& variant_name, int hidden, double target_hz,
              bool verbose) {
  const synth::Dataset ds = synth::load_dataset(data_dir);
  const LifterVariant variant = parse_variant(variant_name);
  const auto train_set = synth::build_lift_samples(ds, "train", variant, target_hz);
  const auto val_set = synth::build_lift_samples(ds, "val", variant, target_hz);
  if (train_set.empty()) throw rt::ConfigError("no training samples in " + data_dir);

  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.lr_init = lr;
  cfg.seed = seed;

  const int width = hidden > 0 ? hidden
                    : variant == LifterVariant::baseline ? 1024
                                                         : 256;
  const TrainResult result = train_lifter(train_set, val_set, variant, cfg, width);
  save_model(result.model, out_path);
  if (verbose) {
    for (const EpochLog& log : result.log)
      std::cerr << "epoch " << log.epoch << " lr " << log.lr << " loss "
                << log.train_loss << " val_mpjpe " << log.val_mpjpe_mm << " mm\n";
    std::cerr << "best epoch " << result.best_epoch << ", saved to " << out_path
              << "\n";
  }
  return kExitOk;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& space, double pck_threshold,
             const std::string& json_path) {
  metrics::MetricsReport rep;
  const Topology& topo = default_topology();
  if (space == "3d") {
    const auto pred = load_sequence_3d(pred_path);
    const auto gt = load_sequence_3d(gt_path);
    rep = metrics::evaluate_3d(pred, gt, topo,
                               pck_threshold > 0 ? pck_threshold : 75.0);
  } else if (space == "2d") {
    const auto pred = load_sequence_2d(pred_path);
    const auto gt = load_sequence_2d(gt_path);
    rep = metrics::evaluate_2d(pred, gt, pck_threshold > 0 ? pck_threshold : 6.0);
  } else {
    throw rt::ConfigError("--space must be 2d or 3d");
  }
  std::cout << metrics::to_text(rep, topo);
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw rt::ConfigError("cannot write " + json_path);
    out << metrics::to_json(rep, topo) << "\n";
  }
  return kExitOk;
}

int cmd_filter(const std::string& in_path, const std::string& out_path,
               double fc_min, double beta, double d_cutoff) {
  OneEuroConfig cfg;
  cfg.fc_min = fc_min;
  cfg.beta = beta;
  cfg.d_cutoff = d_cutoff;
  cfg.validate();
  const auto seq = load_sequence_3d(in_path);
  save_sequence_3d(filter_sequence(seq, cfg), out_path);
  return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& out_path,
            bool threaded, bool verbose) {
  RunSetup setup = load_run_setup(config_path);
  rt::Pipeline pipeline(setup.rig, std::move(setup.model),
                        std::move(setup.detector), setup.options);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path);
    if (!file) throw rt::ConfigError("cannot write " + out_path);
    out = &file;
  }
  write_3d_header(*out, default_topology());

  rt::RunOptions ropt;
  ropt.threaded = threaded;
  const rt::RunStats stats = rt::run_stream(
      pipeline, setup.source,
      [&](std::size_t, const Skeleton3D& s) { write_3d_record(*out, s); }, ropt);
  if (verbose)
    std::cerr << "frames in " << stats.frames_in << ", out " << stats.frames_out
              << ", dropped " << stats.dropped << ", budget overruns "
              << stats.overruns << "\n";
  return kExitOk;
}

int cmd_bench(const std::string& config_path, std::size_t frames) {
  RunSetup setup = load_run_setup(config_path);
  if (setup.n_frames && frames > setup.n_frames) frames = setup.n_frames;
  rt::Pipeline pipeline(setup.rig, std::move(setup.model),
                        std::move(setup.detector), setup.options);
  const rt::BenchReport rep = rt::bench(pipeline, setup.source, frames);
  std::cout << rt::to_text(rep);
  return rep.budget_ok ? kExitOk : kExitRuntime;
}

int cmd_calib_check(const std::string& path, bool verbose) {
  const CameraRig rig = load_calibration(path);
  if (verbose) {
    std::cerr << "posture: " << rig.posture.width << "x" << rig.posture.height
              << " fx " << rig.posture.fx << " fy " << rig.posture.fy << "\n";
    std::cerr << "gait:    " << rig.gait.width << "x" << rig.gait.height
              << " fx " << rig.gait.fx << " fy " << rig.gait.fy << "\n";
  }
  std::cout << "calibration ok\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wpose: dual-camera 3D human pose toolkit"};
  app.require_subcommand(1);

  bool verbose = false;
  std::uint64_t seed = 1;
  app.add_flag("--verbose", verbose, "chatty diagnostics on stderr");
  app.add_option("--seed", seed, "global random seed");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic gait dataset");
  std::string gen_out, gen_subjects = "6,2,2", gen_speeds = "0.3,0.5,0.7";
  std::string gen_noise = "paper-like";
  int gen_repeats = 3;
  double gen_duration = 37.0, gen_rate = 30.0;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--subjects", gen_subjects, "train,val,test subject counts");
  gen->add_option("--speeds", gen_speeds, "walking speeds m/s, comma separated");
  gen->add_option("--repeats", gen_repeats, "repeats per speed");
  gen->add_option("--duration", gen_duration, "trial duration seconds");
  gen->add_option("--rate", gen_rate, "capture rate Hz (>= 19)");
  gen->add_option("--noise-preset", gen_noise, "clean | paper-like");

  // train
  auto* train = app.add_subcommand("train", "train a lifting model");
  std::string train_data, train_out, train_variant = "default";
  int train_epochs = 30, train_batch = 32, train_hidden = 0;
  double train_lr = 2e-3, train_hz = 10.0;
  train->add_option("--data", train_data, "dataset directory from gen")->required();
  train->add_option("--out", train_out, "model output path")->required();
  train->add_option("--epochs", train_epochs, "training epochs");
  train->add_option("--batch", train_batch, "batch size");
  train->add_option("--lr", train_lr, "initial learning rate");
  train->add_option("--variant", train_variant,
                    "default | baseline | projection-residual");
  train->add_option("--hidden", train_hidden, "hidden width (0 = variant default)");
  train->add_option("--target-hz", train_hz, "training sample rate");

  // eval
  auto* eval = app.add_subcommand("eval", "compare two skeleton sequences");
  std::string eval_pred, eval_gt, eval_space = "3d", eval_json;
  double eval_pck = 0;
  eval->add_option("--pred", eval_pred, "predicted sequence file")->required();
  eval->add_option("--gt", eval_gt, "ground-truth sequence file")->required();
  eval->add_option("--space", eval_space, "3d | 2d");
  eval->add_option("--pck-threshold", eval_pck, "PCK threshold (mm or px)");
  eval->add_option("--json", eval_json, "also write a JSON summary here");

  // filter
  auto* filt = app.add_subcommand("filter", "one-euro filter a 3D sequence");
  std::string filt_in, filt_out;
  double filt_fc = 1.5, filt_beta = 0.15, filt_dc = 1.0;
  filt->add_option("--in", filt_in, "input sequence")->required();
  filt->add_option("--out", filt_out, "output sequence")->required();
  filt->add_option("--fc-min", filt_fc, "minimum cutoff Hz");
  filt->add_option("--beta", filt_beta, "cutoff slope");
  filt->add_option("--d-cutoff", filt_dc, "derivative cutoff Hz");

  // run
  auto* run = app.add_subcommand("run", "stream the full pipeline");
  std::string run_config, run_out = "-";
  bool run_threaded = false;
  run->add_option("--config", run_config, "pipeline config JSON")->required();
  run->add_option("--out", run_out, "output file or - for stdout");
  run->add_flag("--threaded", run_threaded, "bounded-queue stage threading");

  // bench
  auto* bench = app.add_subcommand("bench", "latency benchmark");
  std::string bench_config;
  std::size_t bench_frames = 1000;
  bench->add_option("--config", bench_config, "pipeline config JSON")->required();
  bench->add_option("--frames", bench_frames, "frames to measure (>= 100)");

  // calib-check
  auto* calib = app.add_subcommand("calib-check", "validate a calibration file");
  std::string calib_path;
  calib->add_option("--calib", calib_path, "calibration JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen(gen_out, gen_subjects, gen_speeds, gen_repeats, gen_duration,
                     gen_rate, gen_noise, seed, verbose);
    if (train->parsed())
      return cmd_train(train_data, train_out, train_epochs, train_batch, train_lr,
                       seed, train_variant, train_hidden, train_hz, verbose);
    if (eval->parsed())
      return cmd_eval(eval_pred, eval_gt, eval_space, eval_pck, eval_json);
    if (filt->parsed()) return cmd_filter(filt_in, filt_out, filt_fc, filt_beta, filt_dc);
    if (run->parsed()) return cmd_run(run_config, run_out, run_threaded, verbose);
    if (bench->parsed()) return cmd_bench(bench_config, bench_frames);
    if (calib->parsed()) return cmd_calib_check(calib_path, verbose);
  } catch (const rt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CalibrationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
