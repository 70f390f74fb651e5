#include "cardiosynth/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

#include "cardiosynth/bench/bench.hpp"
#include "cardiosynth/bench/pipeline.hpp"
#include "cardiosynth/core/checkpoint.hpp"
#include "cardiosynth/core/config.hpp"
#include "cardiosynth/core/error.hpp"
#include "cardiosynth/core/log.hpp"
#include "cardiosynth/core/manifest.hpp"
#include "cardiosynth/core/nifti.hpp"
#include "cardiosynth/core/rng.hpp"
#include "cardiosynth/infer/infer.hpp"
#include "cardiosynth/metrics/metrics.hpp"
#include "cardiosynth/phantom/phantom.hpp"
#include "cardiosynth/preprocess/preprocess.hpp"
#include "cardiosynth/train/train.hpp"

namespace cardiosynth::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string log_level = "info";
  std::string output_dir;
  std::string profile = "desk";
  bool dry_run = false;

  Profile resolved_profile() const {
    if (const char* env = std::getenv("CARDIOSYNTH_PROFILE"); env && *env) return profile_from_string(env);
    return profile_from_string(profile);
  }
};

struct Ctx {
  Globals g;
  std::ostream& out;
};

std::string out_dir(const Ctx& c, const std::string& local) {
  const std::string& d = local.empty() ? c.g.output_dir : local;
  if (d.empty()) throw ConfigError("an output directory is required (--out or --output-dir)");
  return d;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

void require_dir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) throw ConfigError(std::string(what) + " is not a directory: " + path);
}

bool is_nifti(const fs::path& p) {
  const auto s = p.filename().string();
  return s.ends_with(".nii") || s.ends_with(".nii.gz");
}

std::string nifti_stem(const fs::path& p) {
  auto s = p.filename().string();
  for (const char* ext : {".nii.gz", ".nii"})
    if (s.ends_with(ext)) return s.substr(0, s.size() - std::string_view(ext).size());
  return s;
}

// A NIfTI file or every NIfTI file of a directory, sorted.
std::vector<fs::path> nifti_inputs(const std::string& path) {
  if (fs::is_regular_file(path)) return {path};
  if (!fs::is_directory(path)) throw ConfigError("input not found: " + path);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_regular_file() && is_nifti(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no NIfTI files in " + path);
  return files;
}

void print_json(const Ctx& c, const Json& j) { c.out << j.dump(2) << '\n'; }

void print_plan(const Ctx& c, const std::string& command, Json resolved) {
  print_json(c, {{"command", command}, {"dry_run", c.g.dry_run}, {"resolved", std::move(resolved)}});
}

SchemeKind scheme_flag(int classes) {
  if (classes == 4) return SchemeKind::FourClass;
  if (classes == 8) return SchemeKind::EightClass;
  throw ConfigError("label scheme must be 4 or 8");
}

SegTrainConfig resolve_seg(const Ctx& c, NetworkKind kind, const std::string& path) {
  SegTrainConfig cfg = SegTrainConfig::defaults(kind, c.g.resolved_profile());
  if (!path.empty()) {
    require_file(path, "config file");
    Json j = read_json_file(path);
    if (!j.is_object()) throw ConfigError(path + ": config must be a JSON object");
    if (!j.contains("network_kind")) j["network_kind"] = std::string(to_string(kind));
    if (!j.contains("profile")) j["profile"] = std::string(to_string(c.g.resolved_profile()));
    try {
      cfg = seg_config_from_json(j);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
    if (cfg.network_kind != kind) throw ConfigError(path + ": config is for a different network");
  }
  if (c.g.seed) cfg.seed = *c.g.seed;
  cfg.validate();
  return cfg;
}

GanTrainConfig resolve_gan(const Ctx& c, const std::string& path) {
  GanTrainConfig cfg = GanTrainConfig::defaults(c.g.resolved_profile());
  if (!path.empty()) {
    require_file(path, "config file");
    Json j = read_json_file(path);
    if (!j.is_object()) throw ConfigError(path + ": config must be a JSON object");
    if (!j.contains("profile")) j["profile"] = std::string(to_string(c.g.resolved_profile()));
    try {
      cfg = gan_config_from_json(j);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  if (c.g.seed) cfg.seed = *c.g.seed;
  cfg.validate();
  return cfg;
}

DatasetManifest load_manifest_arg(const std::string& path, const char* what = "manifest") {
  require_file(path, what);
  return load_manifest(path);
}

// ---- phantom
struct PhantomArgs {
  int subjects = 33;
  int slices = 0;
  int size = 0;
  double spacing_mm = 0.0;
  double slice_mm = 10.0;
  std::string out;
};

void run_phantom(const Ctx& c, PhantomArgs a) {
  const bool desk = c.g.resolved_profile() == Profile::desk;
  if (a.slices <= 0) a.slices = desk ? 8 : 10;
  if (a.size <= 0) a.size = desk ? 64 : kPaperCropSize;
  if (!(a.spacing_mm > 0.0)) a.spacing_mm = desk ? 5.2 : kTargetInplaneMm;
  if (a.subjects < 1) throw ConfigError("--subjects must be >= 1");
  const std::uint64_t seed = c.g.seed.value_or(0);
  const phantom::PhantomRanges ranges;
  const phantom::TissueSignalTable table;
  ranges.validate();
  const Spacing spacing(a.spacing_mm, a.spacing_mm, a.slice_mm);
  Json resolved{{"subjects", a.subjects},
                {"phases", {"ED", "ES"}},
                {"shape", {a.slices, a.size, a.size}},
                {"spacing_mm", {a.spacing_mm, a.spacing_mm, a.slice_mm}},
                {"seed", seed},
                {"ranges", to_json(ranges)},
                {"contrast", to_json(table)}};
  if (c.g.dry_run) {
    resolved["out"] = a.out.empty() ? c.g.output_dir : a.out;
    return print_plan(c, "phantom generate", resolved);
  }
  const fs::path dir = out_dir(c, a.out);
  fs::create_directories(dir);
  DatasetManifest m;
  for (int s = 0; s < a.subjects; ++s)
    for (Phase ph : {Phase::ED, Phase::ES}) {
      char id[32];
      std::snprintf(id, sizeof id, "xcat%03d_%s", s, ph == Phase::ED ? "ED" : "ES");
      // both phases of a subject share the anatomy draw
      auto params = phantom::sample_params(derive_seed(seed, s), ranges, ph);
      auto lab = phantom::render_labels(params, Shape3{a.slices, a.size, a.size}, spacing);
      auto img = phantom::simulate_contrast(lab, table, derive_seed(seed, s, static_cast<int>(ph)));
      lab.subject_id = img.subject_id = id;
      lab.phase = img.phase = ph;
      nifti::write_volume(img, (dir / (std::string(id) + "_img.nii.gz")).string());
      nifti::write_labels(lab, (dir / (std::string(id) + "_lab.nii.gz")).string());
      ManifestEntry e;
      e.volume_path = std::string(id) + "_img.nii.gz";
      e.labelmap_path = std::string(id) + "_lab.nii.gz";
      e.scheme = SchemeKind::EightClass;
      e.role = Role::train_net1;
      e.source_tag = "XCAT";
      e.provenance = {{"params", to_json(params)}};
      m.entries.push_back(std::move(e));
    }
  save_manifest(m, (dir / "manifest.json").string());
  resolved["out"] = dir.string();
  print_plan(c, "phantom generate", resolved);
}

// ---- preprocess
struct PreprocessArgs {
  std::string manifest, out;
  double target_mm = 0.0;
  int size = 0;
};

void run_preprocess(const Ctx& c, PreprocessArgs a) {
  const bool desk = c.g.resolved_profile() == Profile::desk;
  if (!(a.target_mm > 0.0)) a.target_mm = desk ? 5.2 : kTargetInplaneMm;
  if (a.size <= 0) a.size = desk ? 64 : kPaperCropSize;
  const auto m = load_manifest_arg(a.manifest);
  for (const auto& e : m.entries) {
    require_file(m.resolve(e.volume_path), "volume");
    if (e.labelmap_path) require_file(m.resolve(*e.labelmap_path), "label map");
  }
  Json resolved{{"manifest", a.manifest}, {"target_mm", a.target_mm}, {"size", a.size}, {"entries", m.entries.size()}};
  if (c.g.dry_run) return print_plan(c, "preprocess", resolved);
  const fs::path dir = out_dir(c, a.out);
  fs::create_directories(dir);
  DatasetManifest outm;
  for (const auto& e : m.entries) {
    const auto img = nifti::read_volume(m.resolve(e.volume_path));
    ManifestEntry o = e;
    o.volume_path = nifti_stem(e.volume_path) + ".nii.gz";
    if (e.labelmap_path) {
      const auto lab = nifti::read_labels(m.resolve(*e.labelmap_path), e.scheme);
      auto p = preprocess::prepare_pair(img, lab, a.target_mm, a.size);
      o.labelmap_path = nifti_stem(*e.labelmap_path) + ".nii.gz";
      nifti::write_volume(p.image, (dir / o.volume_path).string());
      nifti::write_labels(p.labels, (dir / *o.labelmap_path).string());
    } else {
      nifti::write_volume(preprocess::prepare_volume(img, a.target_mm, a.size), (dir / o.volume_path).string());
    }
    outm.entries.push_back(std::move(o));
  }
  save_manifest(outm, (dir / "manifest.json").string());
  resolved["out"] = dir.string();
  print_plan(c, "preprocess", resolved);
}

// ---- train
struct TrainArgs {
  std::string kind, config, manifest, out;
};

void run_train(const Ctx& c, const TrainArgs& a) {
  const auto m = load_manifest_arg(a.manifest);
  if (a.kind == "gan") {
    const auto cfg = resolve_gan(c, a.config);
    Json resolved{{"kind", "gan"}, {"config", to_json(cfg)}, {"manifest", a.manifest}};
    if (c.g.dry_run) return print_plan(c, "train gan", resolved);
    const fs::path dir = out_dir(c, a.out);
    fs::create_directories(dir);
    train::TrainOptions opts;
    opts.log_path = (dir / "gan.jsonl").string();
    auto r = train::train_gan(cfg, m, cfg.augment, opts);
    save_checkpoint(r.generator, (dir / "generator.ckpt").string());
    save_checkpoint(r.encoder, (dir / "encoder.ckpt").string());
    save_checkpoint(r.discriminator, (dir / "discriminator.ckpt").string());
    resolved["epochs"] = r.state.epoch;
    resolved["generator_digest"] = r.generator.digest;
    return print_plan(c, "train gan", resolved);
  }
  const auto kind = network_kind_from_string(a.kind);
  const auto cfg = resolve_seg(c, kind, a.config);
  Json resolved{{"kind", a.kind}, {"config", to_json(cfg)}, {"manifest", a.manifest}};
  if (c.g.dry_run) return print_plan(c, "train " + a.kind, resolved);
  const fs::path dir = out_dir(c, a.out);
  fs::create_directories(dir);
  train::TrainOptions opts;
  opts.log_path = (dir / (a.kind + ".jsonl")).string();
  auto r = train::train_segmentation(cfg, m, cfg.augment, opts);
  save_checkpoint(r.checkpoint, (dir / (a.kind + ".ckpt")).string());
  resolved["epochs"] = r.state.epoch;
  resolved["final_lr"] = r.state.lr;
  resolved["digest"] = r.checkpoint.digest;
  print_plan(c, "train " + a.kind, resolved);
}

// ---- predict-tissue / segment
struct PredictArgs {
  std::string ckpt, input, manifest, out;
};

void run_predict_tissue(const Ctx& c, const PredictArgs& a) {
  require_file(a.ckpt, "checkpoint");
  if (a.input.empty() == a.manifest.empty()) throw ConfigError("exactly one of --input or --manifest is required");
  const auto ckpt = load_checkpoint(a.ckpt);
  if (ckpt.network_kind != "net1") throw ConfigError(a.ckpt + ": expected a net1 checkpoint");
  std::vector<std::pair<fs::path, std::optional<fs::path>>> jobs;  // image, annotation
  std::vector<SchemeKind> schemes;
  DatasetManifest m;
  if (!a.manifest.empty()) {
    m = load_manifest_arg(a.manifest);
    for (const auto& e : m.entries) {
      jobs.emplace_back(m.resolve(e.volume_path),
                        e.labelmap_path ? std::optional<fs::path>(m.resolve(*e.labelmap_path)) : std::nullopt);
      schemes.push_back(e.scheme);
    }
  } else {
    for (const auto& p : nifti_inputs(a.input)) jobs.emplace_back(p, std::nullopt);
  }
  Json resolved{{"checkpoint", a.ckpt}, {"checkpoint_digest", ckpt.digest}, {"volumes", jobs.size()}};
  if (c.g.dry_run) return print_plan(c, "predict-tissue", resolved);
  const fs::path dir = out_dir(c, a.out);
  fs::create_directories(dir);
  auto net = train::load_unet(ckpt);
  const int size = seg_config_from_json(ckpt.config()).input_size;
  DatasetManifest gan;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& [img_path, ann] = jobs[i];
    const auto img = nifti::read_volume(img_path.string());
    auto pred = infer::predict_multitissue(*net, img, size);
    if (ann) {
      auto a = nifti::read_labels(ann->string(), schemes[i]);
      if (a.scheme == SchemeKind::EightClass) a = preprocess::to_four_class(a);
      pred = preprocess::merge_heart_labels(pred, a);
    }
    const auto name = nifti_stem(img_path) + "_tissue.nii.gz";
    nifti::write_labels(pred, (dir / name).string());
    ManifestEntry e;
    e.volume_path = fs::absolute(img_path).string();
    e.labelmap_path = name;
    e.scheme = SchemeKind::EightClass;
    e.role = Role::train_gan;
    e.source_tag = "predicted";
    e.provenance = {{"net1_digest", ckpt.digest}, {"merged_annotation", ann.has_value()}};
    gan.entries.push_back(std::move(e));
  }
  save_manifest(gan, (dir / "manifest.json").string());
  resolved["out"] = dir.string();
  print_plan(c, "predict-tissue", resolved);
}

void run_segment(const Ctx& c, const PredictArgs& a) {
  require_file(a.ckpt, "checkpoint");
  if (a.input.empty()) throw ConfigError("--input is required");
  const auto ckpt = load_checkpoint(a.ckpt);
  if (ckpt.network_kind != "net3") throw ConfigError(a.ckpt + ": expected a net3 checkpoint");
  const auto inputs = nifti_inputs(a.input);
  Json resolved{{"checkpoint", a.ckpt}, {"checkpoint_digest", ckpt.digest}, {"volumes", inputs.size()}};
  if (c.g.dry_run) return print_plan(c, "segment", resolved);
  const fs::path dir = out_dir(c, a.out);
  fs::create_directories(dir);
  auto net = train::load_unet(ckpt);
  const int size = seg_config_from_json(ckpt.config()).input_size;
  for (const auto& p : inputs) {
    const auto pred = infer::segment_cardiac(*net, nifti::read_volume(p.string()), size);
    nifti::write_labels(pred, (dir / (nifti_stem(p) + ".nii.gz")).string());
  }
  resolved["out"] = dir.string();
  print_plan(c, "segment", resolved);
}

// ---- synthesize
struct SynthArgs {
  std::string mode, labels, style, gen, enc, out, z_mode = "shared";
  int label_classes = 8;
};

void run_synthesize(const Ctx& c, const SynthArgs& a) {
  const auto mode = infer::synth_mode_from_string(a.mode);
  require_file(a.gen, "generator checkpoint");
  require_file(a.enc, "encoder checkpoint");
  if (mode == infer::SynthMode::four_class && a.style.empty())
    throw ConfigError("--style is required for 4-class synthesis");
  if (!a.style.empty()) require_file(a.style, "style image");
  if (a.z_mode != "shared" && a.z_mode != "per-slice") throw ConfigError("--z-mode must be shared or per-slice");
  const auto scheme = scheme_flag(a.label_classes);
  const auto inputs = nifti_inputs(a.labels);
  const auto gen = load_checkpoint(a.gen);
  const auto enc = load_checkpoint(a.enc);
  const std::uint64_t seed = c.g.seed.value_or(0);
  Json resolved{{"mode", std::string(infer::to_string(mode))},
                {"labels", inputs.size()},
                {"style", a.style.empty() ? Json(nullptr) : Json(a.style)},
                {"z_mode", a.z_mode},
                {"seed", seed},
                {"generator_digest", gen.digest},
                {"encoder_digest", enc.digest}};
  if (c.g.dry_run) return print_plan(c, "synthesize", resolved);
  const fs::path dir = out_dir(c, a.out);
  fs::create_directories(dir);
  auto g = train::load_generator(gen);
  auto e = train::load_encoder(enc);
  std::optional<Volume> style;
  if (!a.style.empty()) style = nifti::read_volume(a.style);
  DatasetManifest m;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto labels = nifti::read_labels(inputs[i].string(), scheme);
    infer::SynthOptions so;
    so.z_mode = a.z_mode == "shared" ? infer::ZMode::shared : infer::ZMode::per_slice;
    so.seed = derive_seed(seed, i);
    auto r = infer::synthesize_volume(*g, *e, labels, style ? &*style : nullptr, mode, so);
    const auto stem = nifti_stem(inputs[i]);
    nifti::write_volume(r.image, (dir / (stem + "_syn.nii.gz")).string());
    nifti::write_labels(r.labels, (dir / (stem + "_syn_lab.nii.gz")).string());
    ManifestEntry me;
    me.volume_path = stem + "_syn.nii.gz";
    me.labelmap_path = stem + "_syn_lab.nii.gz";
    me.scheme = r.labels.scheme;
    me.role = Role::train_net3;
    me.source_tag = mode == infer::SynthMode::four_class ? "synthetic-4class" : "synthetic-8class";
    me.provenance = {{"label_source", inputs[i].filename().string()},
                     {"style_source", a.style},
                     {"mode", std::string(infer::to_string(mode))},
                     {"generator_digest", gen.digest},
                     {"seed", so.seed}};
    m.entries.push_back(std::move(me));
  }
  save_manifest(m, (dir / "manifest.json").string());
  resolved["out"] = dir.string();
  print_plan(c, "synthesize", resolved);
}

// ---- evaluate
struct EvalArgs {
  std::string pred, gt, out;
  double percentile = 100.0;
  bool per_slice = false;
  int gt_classes = 4;
};

void run_evaluate(const Ctx& c, const EvalArgs& a) {
  require_dir(a.pred, "--pred");
  require_dir(a.gt, "--gt");
  if (a.out.empty()) throw ConfigError("--out is required");
  if (!(a.percentile > 0.0 && a.percentile <= 100.0)) throw ConfigError("--hd-percentile must lie in (0, 100]");
  const auto gt_scheme = scheme_flag(a.gt_classes);
  std::vector<std::pair<fs::path, fs::path>> pairs;
  for (const auto& p : nifti_inputs(a.pred)) {
    fs::path g;
    for (const char* ext : {".nii.gz", ".nii"})
      if (fs::exists(fs::path(a.gt) / (nifti_stem(p) + ext))) g = fs::path(a.gt) / (nifti_stem(p) + ext);
    if (g.empty()) throw ConfigError("no ground truth for " + p.filename().string() + " in " + a.gt);
    pairs.emplace_back(p, g);
  }
  Json resolved{
      {"pairs", pairs.size()}, {"hd_percentile", a.percentile}, {"per_slice", a.per_slice}, {"out", a.out}};
  if (c.g.dry_run) return print_plan(c, "evaluate", resolved);
  metrics::HdOptions opts{a.percentile, a.per_slice};
  std::vector<metrics::MetricsRow> rows;
  for (const auto& [p, g] : pairs) {
    const auto pred = nifti::read_labels(p.string(), SchemeKind::FourClass);
    auto gt = nifti::read_labels(g.string(), gt_scheme);
    if (gt.scheme == SchemeKind::EightClass) gt = preprocess::to_four_class(gt);
    if (gt.subject_id.empty()) gt.subject_id = nifti_stem(g);
    auto r = metrics::evaluate(pred, gt, gt.spacing, opts);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const auto report = metrics::make_report(std::move(rows));
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  write_json_file(a.out, metrics::to_json(report));
  resolved["aggregates"] = metrics::to_json(report).at("aggregates");
  print_plan(c, "evaluate", resolved);
}

// ---- experiment
struct ExperimentArgs {
  std::string spec, real, test, synth4, synth8, net3_config, out, in, format = "text", config, volume, labels;
  std::string mode, styles, gen, enc;
  bool paper = false;
  int slices = 10, count = bench::kSyntheticVolumes, label_classes = 8;
};

void run_experiment_cmd(const Ctx& c, const ExperimentArgs& a) {
  const auto spec = bench::load_experiment_spec(a.spec);
  bench::ExperimentEnv env;
  env.real_pool = load_manifest_arg(a.real, "--real manifest");
  env.test_pool = load_manifest_arg(a.test, "--test manifest");
  if (!a.synth4.empty()) env.synthetic[bench::SyntheticMode::four_class] = load_manifest_arg(a.synth4);
  if (!a.synth8.empty()) env.synthetic[bench::SyntheticMode::eight_class] = load_manifest_arg(a.synth8);
  env.net3 = resolve_seg(c, NetworkKind::net3, a.net3_config);
  const auto train_manifest = bench::build_training_manifest(spec, env);
  Json resolved{{"spec", to_json(spec)},
                {"net3_config", to_json(env.net3)},
                {"training_volumes", train_manifest.entries.size()}};
  if (c.g.dry_run) return print_plan(c, "experiment run", resolved);
  env.work_dir = out_dir(c, a.out);
  const auto r = bench::run_experiment(spec, env);
  resolved["provenance"] = r.provenance;
  resolved["table"] = bench::emit_table({bench::table_row(r)}).text;
  print_plan(c, "experiment run", resolved);
}

void run_experiment_report(const Ctx& c, const ExperimentArgs& a) {
  if (a.format != "csv" && a.format != "text") throw ConfigError("--format must be csv or text");
  std::vector<bench::TableRow> rows;
  if (a.paper) {
    rows = bench::paper_table1();
  } else {
    require_dir(a.in, "--in");
    std::vector<fs::path> results;
    for (const auto& e : fs::recursive_directory_iterator(a.in))
      if (e.is_regular_file() && e.path().filename() == "result.json") results.push_back(e.path());
    std::sort(results.begin(), results.end());
    if (results.empty()) throw ConfigError("no result.json under " + a.in);
    for (const auto& p : results) rows.push_back(bench::table_row_from_json(read_json_file(p.string())));
  }
  if (c.g.dry_run) return print_plan(c, "experiment report", {{"rows", rows.size()}, {"format", a.format}});
  const auto t = bench::emit_table(rows);
  c.out << (a.format == "csv" ? t.csv : t.text);
  if (a.paper && a.format == "text")
    for (const auto& r : bench::acdc_reference_dice())
      c.out << "reference ACDC Dice (" << to_string(r.phase) << ", LV, RV, MYO): " << bench::format_reference_dice(r)
            << '\n';
}

void run_experiment_pipeline(const Ctx& c, const ExperimentArgs& a) {
  auto cfg = bench::PipelineConfig::desk();
  if (!a.config.empty()) {
    require_file(a.config, "pipeline config");
    try {
      cfg = bench::pipeline_config_from_json(read_json_file(a.config));
    } catch (const ConfigError& e) {
      throw ConfigError(a.config + ": " + e.what());
    }
  }
  if (c.g.seed) cfg.seed = *c.g.seed;
  cfg.validate();
  Json resolved{{"config", to_json(cfg)}};
  if (c.g.dry_run) return print_plan(c, "experiment pipeline", resolved);
  const auto r = bench::run_pipeline(cfg, out_dir(c, a.out));
  resolved["labels_carried"] = r.labels_carried;
  resolved["table"] = r.table.text;
  print_plan(c, "experiment pipeline", resolved);
}

void run_experiment_assemble(const Ctx& c, const ExperimentArgs& a) {
  const auto mode = bench::synthetic_mode_from_string(a.mode == "4" ? "four_class" : a.mode == "8" ? "eight_class" : a.mode);
  if (mode == bench::SyntheticMode::none) throw ConfigError("--mode must be 4 or 8");
  const auto labels = load_manifest_arg(a.labels, "--labels manifest");
  const auto styles = load_manifest_arg(a.styles, "--styles manifest");
  require_file(a.gen, "generator checkpoint");
  require_file(a.enc, "encoder checkpoint");
  std::vector<Phase> phases;
  std::vector<std::string> tags;
  for (const auto& e : labels.entries) {
    if (!e.labelmap_path) throw ConfigError("--labels manifest rows need label maps");
    phases.push_back(Phase::none);
  }
  for (const auto& e : styles.entries) tags.push_back(e.source_tag);
  const std::uint64_t seed = c.g.seed.value_or(0);
  Json resolved{{"mode", std::string(bench::to_string(mode))},
                {"count", a.count},
                {"label_pool", labels.entries.size()},
                {"styles", tags},
                {"seed", seed}};
  if (c.g.dry_run) {
    // phases are only known after reading the label files; the count check still applies
    return print_plan(c, "experiment assemble", resolved);
  }
  std::vector<bench::LabelSource> pool;
  for (const auto& e : labels.entries) {
    auto l = nifti::read_labels(labels.resolve(*e.labelmap_path), e.scheme);
    if (l.scheme == SchemeKind::FourClass && mode == bench::SyntheticMode::eight_class)
      throw ConfigError("eight_class assembly needs EightClass labels");
    pool.push_back({l.subject_id.empty() ? nifti_stem(*e.labelmap_path) : l.subject_id, std::move(l)});
  }
  std::vector<bench::StyleSource> style_sources;
  for (const auto& e : styles.entries) style_sources.push_back({e.source_tag, nifti::read_volume(styles.resolve(e.volume_path))});
  const auto m = bench::assemble_synthetic_set(mode, pool, style_sources, load_checkpoint(a.gen), load_checkpoint(a.enc),
                                               a.count, seed, out_dir(c, a.out));
  save_manifest(m, (fs::path(out_dir(c, a.out)) / "manifest.json").string());
  resolved["entries"] = m.entries.size();
  print_plan(c, "experiment assemble", resolved);
}

void run_experiment_montage(const Ctx& c, const ExperimentArgs& a) {
  require_file(a.volume, "--volume");
  require_file(a.labels, "--labels");
  if (a.out.empty()) throw ConfigError("--out is required");
  if (a.slices < 1) throw ConfigError("--slices must be >= 1");
  Json resolved{{"volume", a.volume}, {"labels", a.labels}, {"slices", a.slices}, {"out", a.out}};
  if (c.g.dry_run) return print_plan(c, "experiment montage", resolved);
  const auto vol = nifti::read_volume(a.volume);
  const auto lab = nifti::read_labels(a.labels, scheme_flag(a.label_classes));
  bench::write_montage(vol, lab, a.out, a.slices);
  print_plan(c, "experiment montage", resolved);
}

void error_json(std::ostream& err, const char* kind, const std::string& msg, int code) {
  err << Json{{"error", kind}, {"message", msg}, {"exit_code", code}}.dump() << '\n';
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cardiosynth: phantom-driven cardiac MR synthesis and segmentation", "cardiosynth"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all subcommand help");
  Globals g;
  app.add_option("--seed", g.seed, "Global seed");
  app.add_option("--log-level", g.log_level, "debug|info|warn|error|quiet")->capture_default_str();
  app.add_option("--output-dir", g.output_dir, "Default output directory");
  app.add_option("--profile", g.profile, "desk|paper (CARDIOSYNTH_PROFILE overrides)")->capture_default_str();

  std::function<void(const Ctx&)> action;
  auto dry = [&](CLI::App* sub) { sub->add_flag("--dry-run", g.dry_run, "Validate inputs and print the resolved config"); };

  auto* ph = app.add_subcommand("phantom", "Phantom label maps and images");
  ph->require_subcommand(1);
  PhantomArgs pa;
  auto* gen = ph->add_subcommand("generate", "Render ED and ES phantoms per subject");
  gen->add_option("--subjects", pa.subjects, "Number of subjects")->capture_default_str();
  gen->add_option("--slices", pa.slices, "Slices per volume (profile default)");
  gen->add_option("--size", pa.size, "In-plane size (profile default)");
  gen->add_option("--spacing-mm", pa.spacing_mm, "In-plane spacing (profile default)");
  gen->add_option("--slice-mm", pa.slice_mm, "Slice spacing")->capture_default_str();
  gen->add_option("--out", pa.out, "Output directory");
  dry(gen);
  gen->callback([&] { action = [&](const Ctx& c) { run_phantom(c, pa); }; });

  PreprocessArgs pp;
  auto* pre = app.add_subcommand("preprocess", "Resample, crop and normalize a manifest");
  pre->add_option("--manifest", pp.manifest, "Input manifest")->required();
  pre->add_option("--out", pp.out, "Output directory");
  pre->add_option("--target-mm", pp.target_mm, "In-plane spacing (profile default)");
  pre->add_option("--size", pp.size, "Crop size (profile default)");
  dry(pre);
  pre->callback([&] { action = [&](const Ctx& c) { run_preprocess(c, pp); }; });

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train network 1, network 3 or the GAN");
  tr->add_option("kind", ta.kind, "net1|net3|gan")->required()->check(CLI::IsMember({"net1", "net3", "gan"}));
  tr->add_option("--config", ta.config, "Config JSON (profile defaults otherwise)");
  tr->add_option("--manifest", ta.manifest, "Training manifest")->required();
  tr->add_option("--out", ta.out, "Output directory");
  dry(tr);
  tr->callback([&] { action = [&](const Ctx& c) { run_train(c, ta); }; });

  PredictArgs pt;
  auto* tis = app.add_subcommand("predict-tissue", "Multi-tissue maps with network 1");
  tis->add_option("--ckpt", pt.ckpt, "net1 checkpoint")->required();
  tis->add_option("--input", pt.input, "NIfTI file or directory");
  tis->add_option("--manifest", pt.manifest, "Manifest; rows with labels get their heart annotation merged");
  tis->add_option("--out", pt.out, "Output directory");
  dry(tis);
  tis->callback([&] { action = [&](const Ctx& c) { run_predict_tissue(c, pt); }; });

  PredictArgs sg;
  auto* seg = app.add_subcommand("segment", "Cardiac segmentation with network 3");
  seg->add_option("--ckpt", sg.ckpt, "net3 checkpoint")->required();
  seg->add_option("--input", sg.input, "NIfTI file or directory")->required();
  seg->add_option("--out", sg.out, "Output directory");
  dry(seg);
  seg->callback([&] { action = [&](const Ctx& c) { run_segment(c, sg); }; });

  SynthArgs sa;
  auto* syn = app.add_subcommand("synthesize", "Synthesize volumes from label maps");
  syn->add_option("--mode", sa.mode, "4|8")->required();
  syn->add_option("--labels", sa.labels, "Label NIfTI file or directory")->required();
  syn->add_option("--label-classes", sa.label_classes, "Scheme of the label files, 4|8")->capture_default_str();
  syn->add_option("--style", sa.style, "Style image (required for mode 4)");
  syn->add_option("--gen", sa.gen, "Generator checkpoint")->required();
  syn->add_option("--enc", sa.enc, "Encoder checkpoint")->required();
  syn->add_option("--z-mode", sa.z_mode, "shared|per-slice")->capture_default_str();
  syn->add_option("--out", sa.out, "Output directory");
  dry(syn);
  syn->callback([&] { action = [&](const Ctx& c) { run_synthesize(c, sa); }; });

  EvalArgs ea;
  auto* ev = app.add_subcommand("evaluate", "Dice and Hausdorff per class");
  ev->add_option("--pred", ea.pred, "Predicted label directory")->required();
  ev->add_option("--gt", ea.gt, "Ground-truth label directory (matched by file name)")->required();
  ev->add_option("--gt-classes", ea.gt_classes, "Scheme of the ground truth, 4|8")->capture_default_str();
  ev->add_option("--out", ea.out, "Report JSON path")->required();
  ev->add_option("--hd-percentile", ea.percentile, "Hausdorff percentile")->capture_default_str();
  ev->add_flag("--per-slice", ea.per_slice, "2D Hausdorff per slice, maximum over slices");
  dry(ev);
  ev->callback([&] { action = [&](const Ctx& c) { run_evaluate(c, ea); }; });

  ExperimentArgs xa;
  auto* ex = app.add_subcommand("experiment", "Experiment harness");
  ex->require_subcommand(1);
  auto* run = ex->add_subcommand("run", "Train network 3 per spec and evaluate");
  run->add_option("--spec", xa.spec, "Experiment spec JSON")->required();
  run->add_option("--real", xa.real, "Real-volume pool manifest")->required();
  run->add_option("--test", xa.test, "Test pool manifest")->required();
  run->add_option("--synthetic-4", xa.synth4, "4-class synthetic manifest");
  run->add_option("--synthetic-8", xa.synth8, "8-class synthetic manifest");
  run->add_option("--net3-config", xa.net3_config, "Network 3 config JSON");
  run->add_option("--out", xa.out, "Work directory");
  dry(run);
  run->callback([&] { action = [&](const Ctx& c) { run_experiment_cmd(c, xa); }; });
  auto* rep = ex->add_subcommand("report", "Render result.json files as a table");
  rep->add_option("--in", xa.in, "Directory searched for result.json");
  rep->add_option("--format", xa.format, "csv|text")->capture_default_str();
  rep->add_flag("--paper", xa.paper, "Render the stored published values");
  dry(rep);
  rep->callback([&] { action = [&](const Ctx& c) { run_experiment_report(c, xa); }; });
  auto* pipe = ex->add_subcommand("pipeline", "Desk-scale end-to-end run on phantom stand-ins");
  pipe->add_option("--config", xa.config, "Pipeline config JSON");
  pipe->add_option("--out", xa.out, "Work directory");
  dry(pipe);
  pipe->callback([&] { action = [&](const Ctx& c) { run_experiment_pipeline(c, xa); }; });
  auto* asmb = ex->add_subcommand("assemble", "Assemble a synthetic training set");
  asmb->add_option("--mode", xa.mode, "4|8")->required();
  asmb->add_option("--labels", xa.labels, "Manifest of phantom label maps")->required();
  asmb->add_option("--styles", xa.styles, "Manifest of style images (source_tag names the style)")->required();
  asmb->add_option("--gen", xa.gen, "Generator checkpoint")->required();
  asmb->add_option("--enc", xa.enc, "Encoder checkpoint")->required();
  asmb->add_option("--count", xa.count, "Synthetic volumes")->capture_default_str();
  asmb->add_option("--out", xa.out, "Output directory");
  dry(asmb);
  asmb->callback([&] { action = [&](const Ctx& c) { run_experiment_assemble(c, xa); }; });
  auto* mon = ex->add_subcommand("montage", "PNG montage of slices with label overlay");
  mon->add_option("--volume", xa.volume, "Image NIfTI")->required();
  mon->add_option("--labels", xa.labels, "Label NIfTI")->required();
  mon->add_option("--label-classes", xa.label_classes, "4|8")->capture_default_str();
  mon->add_option("--slices", xa.slices, "Columns")->capture_default_str();
  mon->add_option("--out", xa.out, "PNG path")->required();
  dry(mon);
  mon->callback([&] { action = [&](const Ctx& c) { run_experiment_montage(c, xa); }; });

  std::vector<std::string> argv_store{"cardiosynth"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // help requested on a subcommand surfaces here too
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    error_json(err, "usage", e.what(), kExitUsage);
    return kExitUsage;
  }
  for (const auto* sub : app.get_subcommands()) {
    (void)sub;
  }
  try {
    log::set_level(log::level_from_string(g.log_level));
    Ctx ctx{g, out};
    (void)ctx.g.resolved_profile();
    if (!action) throw ConfigError("no command given");
    action(ctx);
    return kExitOk;
  } catch (const ConfigError& e) {
    error_json(err, "config", e.what(), kExitConfig);
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    error_json(err, "config", e.what(), kExitConfig);
    return kExitConfig;
  } catch (const std::exception& e) {
    error_json(err, "runtime", e.what(), kExitRuntime);
    return kExitRuntime;
  }
}

}  // namespace cardiosynth::cli
