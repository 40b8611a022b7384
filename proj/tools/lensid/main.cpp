#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lensid/clips/clip_generator.hpp"
#include "lensid/data/annotations.hpp"
#include "lensid/data/image_io.hpp"
#include "lensid/data/manifest.hpp"
#include "lensid/data/video.hpp"
#include "lensid/pipeline/analyze.hpp"
#include "lensid/pipeline/eval.hpp"
#include "lensid/pipeline/segmenter.hpp"
#include "lensid/train/harness.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lensid;

/// One exit code per error category so scripts can branch on failures.
int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::validation:
    case ErrorKind::shape:
    case ErrorKind::config: return 2;
    case ErrorKind::io:
    case ErrorKind::decode: return 3;
    case ErrorKind::model:
    case ErrorKind::training: return 4;
    case ErrorKind::phase_not_found: return 5;
  }
  return 1;
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  check(in.good(), ErrorKind::io, "cannot open config: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DecodeError("config " + path + ": " + e.what());
  }
  check(j.is_object(), ErrorKind::config, "config root must be a JSON object");
  return j;
}

template <class T>
T input_at(const json& in, const char* key) {
  check(in.contains(key), ErrorKind::config, std::string("run inputs missing key: ") + key);
  try {
    return in.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("run inputs key has wrong type: ") + key);
  }
}

fs::path need_out(const std::string& out) {
  check(!out.empty(), ErrorKind::validation, "--out is required");
  return fs::path(out);
}

/// Inputs are recorded absolute so a run.json replays from any directory.
std::string abspath(const std::string& p) {
  return fs::absolute(fs::path(p)).lexically_normal().string();
}

/// Record everything needed to reproduce the run. Written before the heavy
/// work starts but after the inputs have been validated, so a run that dies
/// on a missing file leaves no output directory behind.
void write_run_json(const fs::path& out_dir, const std::string& command, std::uint64_t seed,
                    const json& inputs, const json& config) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  check(!ec && fs::is_directory(out_dir), ErrorKind::io,
        "cannot create output directory: " + out_dir.string());
  json j{{"command", command},
         {"version", LENSID_VERSION},
         {"seed", seed},
         {"inputs", inputs},
         {"config", config}};
  std::ofstream out(out_dir / "run.json", std::ios::binary);
  check(out.good(), ErrorKind::io, "cannot write run.json in " + out_dir.string());
  out << j.dump(2) << '\n';
  check(out.good(), ErrorKind::io, "failed writing run.json");
}

json analyze_config_to_json(const pipeline::AnalyzeConfig& c) {
  return {{"window_stride_s", c.window_stride_s},
          {"unfolding",
           {{"area_fraction", c.unfolding.area_fraction},
            {"dist_threshold", c.unfolding.dist_threshold},
            {"sustain_s", c.unfolding.sustain_s}}},
          {"stability",
           {{"dist_threshold", c.stability.dist_threshold},
            {"sustain_s", c.stability.sustain_s},
            {"guard_fraction", c.stability.guard_fraction}}},
          {"morphology",
           {{"closing_size", c.morphology.closing_size},
            {"opening_size", c.morphology.opening_size},
            {"close_first", c.morphology.close_first}}}};
}

pipeline::AnalyzeConfig analyze_config_from_json(const json& j) {
  train::detail::reject_unknown_keys(
      j, {"window_stride_s", "unfolding", "stability", "morphology"}, "analyze");
  pipeline::AnalyzeConfig c;
  c.window_stride_s = train::detail::get_or(j, "window_stride_s", c.window_stride_s, "analyze");
  if (j.contains("unfolding")) {
    const json& u = j.at("unfolding");
    train::detail::reject_unknown_keys(u, {"area_fraction", "dist_threshold", "sustain_s"},
                                       "unfolding");
    c.unfolding.area_fraction =
        train::detail::get_or(u, "area_fraction", c.unfolding.area_fraction, "unfolding");
    c.unfolding.dist_threshold =
        train::detail::get_or(u, "dist_threshold", c.unfolding.dist_threshold, "unfolding");
    c.unfolding.sustain_s =
        train::detail::get_or(u, "sustain_s", c.unfolding.sustain_s, "unfolding");
  }
  if (j.contains("stability")) {
    const json& s = j.at("stability");
    train::detail::reject_unknown_keys(s, {"dist_threshold", "sustain_s", "guard_fraction"},
                                       "stability");
    c.stability.dist_threshold =
        train::detail::get_or(s, "dist_threshold", c.stability.dist_threshold, "stability");
    c.stability.sustain_s =
        train::detail::get_or(s, "sustain_s", c.stability.sustain_s, "stability");
    c.stability.guard_fraction =
        train::detail::get_or(s, "guard_fraction", c.stability.guard_fraction, "stability");
  }
  if (j.contains("morphology")) {
    const json& m = j.at("morphology");
    train::detail::reject_unknown_keys(m, {"closing_size", "opening_size", "close_first"},
                                       "morphology");
    c.morphology.closing_size =
        train::detail::get_or(m, "closing_size", c.morphology.closing_size, "morphology");
    c.morphology.opening_size =
        train::detail::get_or(m, "opening_size", c.morphology.opening_size, "morphology");
    c.morphology.close_first =
        train::detail::get_or(m, "close_first", c.morphology.close_first, "morphology");
  }
  return c;
}

std::string resolve_against(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path.string() : (base / path).string();
}

/// Manifest paths are taken relative to the manifest file itself, so a
/// dataset directory can be moved wholesale.
std::vector<data::SegSample> load_seg_samples(const std::string& manifest_path,
                                              std::int64_t image_size, const std::string& split) {
  check(split == "train" || split == "test" || split == "all", ErrorKind::config,
        "split must be train, test, or all: " + split);
  check(image_size > 0, ErrorKind::validation, "image size must be positive");
  const data::DatasetManifest m = data::load_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<data::SegSample> out;
  for (const auto& e : m.entries) {
    if (split != "all" && data::to_string(e.split) != split) continue;
    data::SegSample s{data::load_image(resolve_against(base, e.image), image_size),
                      data::load_mask(resolve_against(base, e.mask), image_size), e.video,
                      e.frame};
    out.push_back(std::move(s));
  }
  check(!out.empty(), ErrorKind::validation,
        "no samples in split '" + split + "' of " + manifest_path);
  return out;
}

void check_file(const std::string& path, const char* what) {
  check(fs::is_regular_file(path), ErrorKind::io, std::string(what) + " not found: " + path);
}

// ---------------------------------------------------------------------------
// command cores; the CLI handlers and replay both funnel into these

void run_make_clips(const json& inputs, const json& config, std::uint64_t seed,
                    const fs::path& out_dir) {
  train::detail::reject_unknown_keys(config, {}, "make-clips");
  const auto ann_path = input_at<std::string>(inputs, "annotations");
  const auto anns = data::load_annotations(ann_path);
  write_run_json(out_dir, "make-clips", seed, inputs, config);

  std::string csv = "video_id,start_s,end_s,label\n";
  std::size_t n = 0;
  for (const auto& a : anns) {
    for (const auto& c : clips::partition_video(a)) {
      csv += c.video_id + ',' + g17(c.start) + ',' + g17(c.end) + ',' + to_string(c.label) + '\n';
      ++n;
    }
  }
  const fs::path csv_path = out_dir / "clips.csv";
  std::ofstream out(csv_path, std::ios::binary);
  check(out.good(), ErrorKind::io, "cannot write " + csv_path.string());
  out << csv;
  check(out.good(), ErrorKind::io, "failed writing " + csv_path.string());
  std::printf("wrote %zu clip specs for %zu videos to %s\n", n, anns.size(), csv_path.c_str());
}

void run_train_seg(const json& inputs, const json& config, std::uint64_t seed,
                   const fs::path& out_dir) {
  train::detail::reject_unknown_keys(config, {"train", "model", "loss"}, "train-seg");
  json tsec = config.value("train", json::object());
  if (tsec.is_object() && !tsec.contains("task")) tsec["task"] = "seg";
  train::TrainConfig cfg = train::train_config_from_json(tsec);
  cfg.seed = seed;
  const auto model_cfg = train::adaptnet_config_from_json(config.value("model", json::object()));
  const auto loss_cfg = train::loss_config_from_json(config.value("loss", json::object()));

  const auto dataset = load_seg_samples(input_at<std::string>(inputs, "manifest"),
                                        input_at<std::int64_t>(inputs, "image_size"),
                                        input_at<std::string>(inputs, "split"));
  const json resolved{{"train", train::to_json(cfg)},
                      {"model", train::to_json(model_cfg)},
                      {"loss", train::to_json(loss_cfg)}};
  write_run_json(out_dir, "train-seg", seed, inputs, resolved);

  const train::TrainResult res = train::train_seg(cfg, model_cfg, loss_cfg, dataset, out_dir);
  std::printf("trained on %zu images; best val dice %.4f at epoch %lld; outputs in %s\n",
              dataset.size(), res.best_val_metric, static_cast<long long>(res.best_epoch),
              out_dir.c_str());
}

void run_train_phase(const json& inputs, const json& config, std::uint64_t seed,
                     const fs::path& out_dir) {
  train::detail::reject_unknown_keys(config, {"train", "model"}, "train-phase");
  json tsec = config.value("train", json::object());
  if (tsec.is_object() && !tsec.contains("task")) tsec["task"] = "phase";
  train::TrainConfig cfg = train::train_config_from_json(tsec);
  cfg.seed = seed;
  const auto model_cfg = train::phase_config_from_json(config.value("model", json::object()));

  const auto frames_root = input_at<std::string>(inputs, "frames_root");
  const auto image_size = input_at<std::int64_t>(inputs, "image_size");
  check(image_size > 0, ErrorKind::validation, "image size must be positive");
  const auto anns = data::load_annotations(input_at<std::string>(inputs, "annotations"));
  check(!anns.empty(), ErrorKind::validation, "annotations list no videos");

  std::map<std::string, std::shared_ptr<data::VideoFrames>> videos;
  std::vector<clips::ClipSpec> specs;
  for (const auto& a : anns) {
    const fs::path dir = fs::path(frames_root) / a.video_id;
    videos[a.video_id] = std::make_shared<data::FrameDirectory>(dir.string(), a.fps, image_size);
    const auto part = clips::partition_video(a);
    specs.insert(specs.end(), part.begin(), part.end());
  }
  const json resolved{{"train", train::to_json(cfg)}, {"model", train::to_json(model_cfg)}};
  write_run_json(out_dir, "train-phase", seed, inputs, resolved);

  const auto dataset =
      clips::build_balanced_epoch(specs, videos, model_cfg.sequence_length, seed);
  const train::TrainResult res = train::train_phase(cfg, model_cfg, dataset, out_dir);
  std::printf("trained on %zu clips from %zu videos; best val accuracy %.4f at epoch %lld; "
              "outputs in %s\n",
              dataset.size(), anns.size(), res.best_val_metric,
              static_cast<long long>(res.best_epoch), out_dir.c_str());
}

void run_eval_seg(const json& inputs, const json& config, std::uint64_t seed,
                  const fs::path& out_dir) {
  train::detail::reject_unknown_keys(config, {}, "eval-seg");
  const auto ckpt = input_at<std::string>(inputs, "checkpoint");
  check_file(ckpt, "checkpoint");
  const auto samples = load_seg_samples(input_at<std::string>(inputs, "manifest"),
                                        input_at<std::int64_t>(inputs, "image_size"),
                                        input_at<std::string>(inputs, "split"));
  pipeline::AdaptNetSegmenter segmenter = pipeline::AdaptNetSegmenter::from_checkpoint(
      ckpt, input_at<std::int64_t>(inputs, "infer_size"));
  write_run_json(out_dir, "eval-seg", seed, inputs, config);

  const pipeline::EvalResult res = pipeline::eval_seg(segmenter, samples);
  pipeline::save_eval_csv(res, (out_dir / "eval.csv").string());
  std::printf("evaluated %zu images: mean dice %.4f (std %.4f), mean iou %.4f; wrote %s\n",
              res.rows.size(), res.mean_dice, res.std_dice, res.mean_iou,
              (out_dir / "eval.csv").c_str());
}

void run_analyze(const json& inputs, const json& config, std::uint64_t seed,
                 const fs::path& out_dir) {
  train::detail::reject_unknown_keys(config, {"analyze"}, "analyze");
  pipeline::AnalyzeConfig cfg = analyze_config_from_json(config.value("analyze", json::object()));

  const auto frames = input_at<std::string>(inputs, "frames");
  const auto fps = input_at<double>(inputs, "fps");
  const auto image_size = input_at<std::int64_t>(inputs, "image_size");
  const auto infer_size = input_at<std::int64_t>(inputs, "infer_size");
  const auto phase_ckpt = input_at<std::string>(inputs, "phase_checkpoint");
  const auto lens_ckpt = input_at<std::string>(inputs, "lens_checkpoint");
  const auto pupil_ckpt = input_at<std::string>(inputs, "pupil_checkpoint");
  check(fps > 0, ErrorKind::validation, "fps must be positive");
  check_file(phase_ckpt, "phase checkpoint");
  check_file(lens_ckpt, "lens checkpoint");
  check_file(pupil_ckpt, "pupil checkpoint");

  const models::PhaseModel<float> phase = pipeline::phase_model_from_checkpoint(phase_ckpt);
  pipeline::AdaptNetSegmenter lens =
      pipeline::AdaptNetSegmenter::from_checkpoint(lens_ckpt, infer_size);
  pipeline::AdaptNetSegmenter pupil =
      pipeline::AdaptNetSegmenter::from_checkpoint(pupil_ckpt, infer_size);
  const data::FrameDirectory video(frames, fps, image_size);
  write_run_json(out_dir, "analyze", seed, inputs, {{"analyze", analyze_config_to_json(cfg)}});

  const pipeline::AnalyzeResult res = pipeline::analyze_video(phase, video, lens, pupil, cfg);
  pipeline::write_analysis_report(res, cfg, out_dir.string());

  std::printf("implantation: %.2f s to %.2f s\n", res.localization.start_s,
              res.localization.end_s);
  if (res.unfolding.reached)
    std::printf("unfolding delay: %.2f s\n", res.unfolding.delay_s);
  else
    std::printf("unfolding delay: not reached\n");
  if (res.stability.reached)
    std::printf("stabilization: %.2f s\n", res.stability.stabilization_s);
  else
    std::printf("stabilization: not reached\n");
  std::printf("report in %s\n", out_dir.c_str());
}

void run_command(const std::string& command, const json& inputs, const json& config,
                 std::uint64_t seed, const fs::path& out_dir) {
  if (command == "make-clips") return run_make_clips(inputs, config, seed, out_dir);
  if (command == "train-seg") return run_train_seg(inputs, config, seed, out_dir);
  if (command == "train-phase") return run_train_phase(inputs, config, seed, out_dir);
  if (command == "eval-seg") return run_eval_seg(inputs, config, seed, out_dir);
  if (command == "analyze") return run_analyze(inputs, config, seed, out_dir);
  throw ConfigError("unknown command: " + command);
}

void run_replay(const std::string& run_path, bool seed_given, std::uint64_t seed,
                const fs::path& out_dir) {
  std::ifstream in(run_path);
  check(in.good(), ErrorKind::io, "cannot open run file: " + run_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DecodeError("run file " + run_path + ": " + e.what());
  }
  train::detail::reject_unknown_keys(j, {"command", "version", "seed", "inputs", "config"},
                                     "run");
  const auto command = input_at<std::string>(j, "command");
  const auto version = input_at<std::string>(j, "version");
  if (version != LENSID_VERSION)
    std::fprintf(stderr, "note: run.json was written by version %s, this is %s\n",
                 version.c_str(), LENSID_VERSION);
  const std::uint64_t replay_seed = seed_given ? seed : input_at<std::uint64_t>(j, "seed");
  run_command(command, j.value("inputs", json::object()), j.value("config", json::object()),
              replay_seed, out_dir);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"lens irregularity analysis for cataract surgery video"};
  app.set_version_flag("--version", LENSID_VERSION);
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 2 invalid input or configuration, 3 unreadable or\n"
             "unwritable files, 4 model/checkpoint mismatch or training failure, 5 no\n"
             "implantation phase found.");

  std::string out_dir, config_path;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "seed for any randomized step");
  app.add_option("--out", out_dir, "output directory; every file the run writes lands here");
  app.add_option("--config", config_path, "JSON config file");

  auto* mk = app.add_subcommand("make-clips",
                                "partition annotated videos into labelled training clips");
  mk->fallthrough();
  std::string mk_ann;
  mk->add_option("--annotations", mk_ann, "phase annotation csv")->required();

  auto* ts = app.add_subcommand("train-seg", "train a binary segmentation model");
  ts->fallthrough();
  std::string ts_manifest, ts_split = "train";
  std::int64_t ts_size = 64;
  ts->add_option("--manifest", ts_manifest, "dataset manifest (json lines)")->required();
  ts->add_option("--image-size", ts_size, "square training resolution");
  ts->add_option("--split", ts_split, "train, test, or all");

  auto* tp = app.add_subcommand("train-phase", "train the implantation phase classifier");
  tp->fallthrough();
  std::string tp_frames, tp_ann;
  std::int64_t tp_size = 64;
  tp->add_option("--frames-root", tp_frames, "directory with one frame folder per video_id")
      ->required();
  tp->add_option("--annotations", tp_ann, "phase annotation csv")->required();
  tp->add_option("--image-size", tp_size, "square training resolution");

  auto* ev = app.add_subcommand("eval-seg", "score a segmentation checkpoint against a manifest");
  ev->fallthrough();
  std::string ev_manifest, ev_ckpt, ev_split = "test";
  std::int64_t ev_size = 64, ev_infer = 0;
  ev->add_option("--manifest", ev_manifest, "dataset manifest (json lines)")->required();
  ev->add_option("--checkpoint", ev_ckpt, "segmentation checkpoint")->required();
  ev->add_option("--image-size", ev_size, "square evaluation resolution");
  ev->add_option("--infer-size", ev_infer, "model input resolution, 0 keeps the frame grid");
  ev->add_option("--split", ev_split, "train, test, or all");

  auto* an = app.add_subcommand("analyze",
                                "locate the implantation phase and measure lens unfolding");
  an->fallthrough();
  std::string an_frames, an_phase, an_lens, an_pupil;
  double an_fps = 0, an_stride = 1.0;
  std::int64_t an_size = 128, an_infer = 0;
  an->add_option("--frames", an_frames, "directory of video frames in filename order")
      ->required();
  an->add_option("--fps", an_fps, "frame rate of the frame directory")->required();
  an->add_option("--phase-checkpoint", an_phase, "phase classifier checkpoint")->required();
  an->add_option("--lens-checkpoint", an_lens, "lens segmentation checkpoint")->required();
  an->add_option("--pupil-checkpoint", an_pupil, "pupil segmentation checkpoint")->required();
  auto* stride_opt = an->add_option("--stride", an_stride, "localization window stride, seconds");
  an->add_option("--image-size", an_size, "square analysis resolution");
  an->add_option("--infer-size", an_infer, "segmentation input resolution, 0 keeps the frame grid");

  auto* rp = app.add_subcommand("replay", "re-run a recorded run.json");
  rp->fallthrough();
  std::string rp_run;
  rp->add_option("run_json", rp_run, "path to a run.json written by an earlier run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const json config = load_config_file(config_path);
    const fs::path out = need_out(out_dir);
    const bool seed_given = seed_opt->count() > 0;

    if (mk->parsed()) {
      run_make_clips({{"annotations", abspath(mk_ann)}}, config, seed, out);
    } else if (ts->parsed()) {
      run_train_seg({{"manifest", abspath(ts_manifest)}, {"image_size", ts_size}, {"split", ts_split}},
                    config, seed, out);
    } else if (tp->parsed()) {
      run_train_phase(
          {{"frames_root", abspath(tp_frames)}, {"annotations", abspath(tp_ann)}, {"image_size", tp_size}},
          config,
          seed, out);
    } else if (ev->parsed()) {
      run_eval_seg({{"manifest", abspath(ev_manifest)},
                    {"checkpoint", abspath(ev_ckpt)},
                    {"image_size", ev_size},
                    {"infer_size", ev_infer},
                    {"split", ev_split}},
                   config, seed, out);
    } else if (an->parsed()) {
      json cfg = config;
      if (stride_opt->count() > 0) cfg["analyze"]["window_stride_s"] = an_stride;
      run_analyze({{"frames", abspath(an_frames)},
                   {"fps", an_fps},
                   {"image_size", an_size},
                   {"infer_size", an_infer},
                   {"phase_checkpoint", abspath(an_phase)},
                   {"lens_checkpoint", abspath(an_lens)},
                   {"pupil_checkpoint", abspath(an_pupil)}},
                  cfg, seed, out);
    } else if (rp->parsed()) {
      run_replay(rp_run, seed_given, seed, out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
