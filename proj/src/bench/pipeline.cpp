#include "cardiosynth/bench/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "cardiosynth/core/digest.hpp"
#include "cardiosynth/core/error.hpp"
#include "cardiosynth/core/json_reader.hpp"
#include "cardiosynth/core/log.hpp"
#include "cardiosynth/core/manifest.hpp"
#include "cardiosynth/core/nifti.hpp"
#include "cardiosynth/core/rng.hpp"
#include "cardiosynth/infer/infer.hpp"
#include "cardiosynth/preprocess/preprocess.hpp"
#include "cardiosynth/train/train.hpp"

namespace cardiosynth::bench {

namespace fs = std::filesystem;

phantom::TissueSignalTable PipelineConfig::real_style_contrast() {
  phantom::TissueSignalTable t;
  t.mean = {0.03, 0.42, 0.06, 0.33, 0.55, 0.88, 0.22, 0.92};
  t.noise_sigma = 0.04;
  t.bias_field_amplitude = 0.08;
  return t;
}

PipelineConfig PipelineConfig::desk() {
  PipelineConfig c;
  c.net1.unet_base_channels = 16;
  c.net1.max_epochs = 30;
  c.gan.epochs = 30;
  c.net3.max_epochs = 30;
  c.gan.conditioning = Conditioning::eight_class;
  return c;
}

void PipelineConfig::validate() const {
  if (xcat_subjects < 1 || real_subjects < 1 || test_subjects < 1)
    throw ConfigError("pipeline: subject counts must be >= 1");
  if (synthetic_volumes < 1 || synthetic_volumes > xcat_subjects)
    throw ConfigError("pipeline: synthetic_volumes must lie in [1, xcat_subjects]");
  if (slices < 4) throw ConfigError("pipeline: at least 4 slices are required");
  if (!(native_mm > 0.0) || !(target_mm > 0.0) || native_size < 8) throw ConfigError("pipeline: bad native geometry");
  if (net1.network_kind != NetworkKind::net1 || net3.network_kind != NetworkKind::net3)
    throw ConfigError("pipeline: network kinds do not match their stages");
  if (gan.conditioning != Conditioning::eight_class) throw ConfigError("pipeline: the GAN stage is eight_class");
  if (net1.input_size != gan.input_size || net3.input_size != gan.input_size)
    throw ConfigError("pipeline: all networks must share one input size");
  net1.validate();
  net3.validate();
  gan.validate();
  real_contrast.validate();
}

Json to_json(const PipelineConfig& c) {
  return {{"seed", c.seed},
          {"xcat_subjects", c.xcat_subjects},
          {"real_subjects", c.real_subjects},
          {"test_subjects", c.test_subjects},
          {"slices", c.slices},
          {"synthetic_volumes", c.synthetic_volumes},
          {"native_size", c.native_size},
          {"native_mm", c.native_mm},
          {"target_mm", c.target_mm},
          {"net1", to_json(c.net1)},
          {"gan", to_json(c.gan)},
          {"net3", to_json(c.net3)},
          {"real_contrast_mean", c.real_contrast.mean}};
}

PipelineConfig pipeline_config_from_json(const Json& j) {
  PipelineConfig c = PipelineConfig::desk();
  JsonReader r(j, "pipeline");
  r.get("seed", c.seed);
  r.get("xcat_subjects", c.xcat_subjects);
  r.get("real_subjects", c.real_subjects);
  r.get("test_subjects", c.test_subjects);
  r.get("slices", c.slices);
  r.get("synthetic_volumes", c.synthetic_volumes);
  r.get("native_size", c.native_size);
  r.get("native_mm", c.native_mm);
  r.get("target_mm", c.target_mm);
  r.get_with("net1", [&](const Json& v) { c.net1 = seg_config_from_json(v); });
  r.get_with("gan", [&](const Json& v) { c.gan = gan_config_from_json(v); });
  r.get_with("net3", [&](const Json& v) { c.net3 = seg_config_from_json(v); });
  r.get_with("real_contrast_mean", [&](const Json& v) { c.real_contrast.mean = v.get<std::vector<double>>(); });
  r.finish();
  c.validate();
  return c;
}

namespace {

struct Stage {
  fs::path root;
  std::map<std::string, std::string>* digests;

  std::string rel(const fs::path& p) const { return fs::relative(p, root).generic_string(); }
  void record(const fs::path& p) const { (*digests)[rel(p)] = file_digest(p.string()); }
};

struct Subject {
  LabelMap labels;
  Volume image;
};

Subject make_subject(const PipelineConfig& cfg, std::uint64_t seed, Phase phase, const phantom::TissueSignalTable& t,
                     const std::string& id) {
  const auto params = phantom::sample_params(seed, {}, phase);
  auto lab = phantom::render_labels(params, Shape3{cfg.slices, cfg.native_size, cfg.native_size},
                                    Spacing(cfg.native_mm, cfg.native_mm, 10.0));
  auto img = phantom::simulate_contrast(lab, t, derive_seed(seed, 1));
  lab.subject_id = img.subject_id = id;
  img.phase = lab.phase = phase;
  auto p = preprocess::prepare_pair(img, lab, cfg.target_mm, cfg.net1.input_size);
  p.image.subject_id = p.labels.subject_id = id;
  return {std::move(p.labels), std::move(p.image)};
}

ManifestEntry row(const std::string& img, std::optional<std::string> lab, SchemeKind scheme, Role role,
                  const std::string& tag) {
  ManifestEntry e;
  e.volume_path = img;
  e.labelmap_path = std::move(lab);
  e.scheme = scheme;
  e.role = role;
  e.source_tag = tag;
  return e;
}

void save_rel_manifest(const DatasetManifest& m, const fs::path& path, const Stage& st) {
  save_manifest(m, path.string());
  st.record(path);
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::string& work_dir) {
  cfg.validate();
  const fs::path root = fs::absolute(work_dir);
  fs::create_directories(root);
  PipelineResult res;
  Stage st{root, &res.digests};
  for (const char* d : {"phantom", "real", "test", "tissue", "synthetic", "models", "report"})
    fs::create_directories(root / d);
  write_json_file((root / "pipeline_config.json").string(), to_json(cfg));
  st.record(root / "pipeline_config.json");

  // 1. phantom subjects (multi-tissue ground truth) and real stand-ins (heart annotations only)
  log::info("pipeline: generating phantom data");
  DatasetManifest xcat, real, test;
  xcat.base_dir = real.base_dir = test.base_dir = root.string();
  std::vector<Subject> xcat_subjects;
  const phantom::TissueSignalTable sim{};
  for (int i = 0; i < cfg.xcat_subjects; ++i) {
    const std::string id = "xcat" + std::to_string(i);
    auto s = make_subject(cfg, derive_seed(cfg.seed, 10, i), i % 2 ? Phase::ES : Phase::ED, sim, id);
    const auto img = "phantom/" + id + "_img.nii.gz", lab = "phantom/" + id + "_lab.nii.gz";
    nifti::write_volume(s.image, (root / img).string());
    nifti::write_labels(s.labels, (root / lab).string());
    st.record(root / img);
    st.record(root / lab);
    xcat.entries.push_back(row(img, lab, SchemeKind::EightClass, Role::train_net1, "XCAT"));
    xcat_subjects.push_back(std::move(s));
  }
  std::vector<Subject> real_subjects;
  auto add_real = [&](DatasetManifest& m, const std::string& dir, int n, int stream, Role role) {
    for (int i = 0; i < n; ++i) {
      const std::string id = dir + std::to_string(i);
      auto s = make_subject(cfg, derive_seed(cfg.seed, stream, i), i % 2 ? Phase::ES : Phase::ED, cfg.real_contrast, id);
      const auto img = dir + "/" + id + "_img.nii.gz", lab = dir + "/" + id + "_lab.nii.gz";
      nifti::write_volume(s.image, (root / img).string());
      nifti::write_labels(preprocess::to_four_class(s.labels), (root / lab).string());
      st.record(root / img);
      st.record(root / lab);
      m.entries.push_back(row(img, lab, SchemeKind::FourClass, role, "ACDC"));
      if (role == Role::train_net3) real_subjects.push_back(std::move(s));
    }
  };
  add_real(real, "real", cfg.real_subjects, 20, Role::train_net3);
  add_real(test, "test", cfg.test_subjects, 30, Role::test_net3);
  save_rel_manifest(xcat, root / "xcat_manifest.json", st);
  save_rel_manifest(real, root / "real_manifest.json", st);
  save_rel_manifest(test, root / "test_manifest.json", st);

  // 2. network 1 on the phantom data
  log::info("pipeline: training network 1");
  train::TrainOptions opts;
  opts.log_path = (root / "models" / "net1.jsonl").string();
  auto net1 = train::train_segmentation(cfg.net1, xcat, cfg.net1.augment, opts);
  save_checkpoint(net1.checkpoint, (root / "models" / "net1.ckpt").string());
  st.record(root / "models" / "net1.ckpt");

  // 3. tissue prediction on real images, heart replaced by the annotation
  log::info("pipeline: predicting tissue maps");
  DatasetManifest gan_data;
  gan_data.base_dir = root.string();
  for (const auto& e : real.entries) {
    const auto img = nifti::read_volume(real.resolve(e.volume_path));
    const auto ann = nifti::read_labels(real.resolve(*e.labelmap_path), SchemeKind::FourClass);
    const auto pred = infer::predict_multitissue(*net1.model, img, cfg.net1.input_size);
    auto merged = preprocess::merge_heart_labels(pred, ann);
    merged.subject_id = img.subject_id;
    const auto lab = "tissue/" + fs::path(e.volume_path).stem().stem().string() + "_tissue.nii.gz";
    nifti::write_labels(merged, (root / lab).string());
    st.record(root / lab);
    gan_data.entries.push_back(row(e.volume_path, lab, SchemeKind::EightClass, Role::train_gan, "ACDC"));
  }
  save_rel_manifest(gan_data, root / "gan_manifest.json", st);

  // 4. XCAT-GAN
  log::info("pipeline: training the GAN");
  opts.log_path = (root / "models" / "gan.jsonl").string();
  auto gan = train::train_gan(cfg.gan, gan_data, cfg.gan.augment, opts);
  for (const auto& [name, ck] : {std::pair{"generator", &gan.generator}, {"encoder", &gan.encoder},
                                 {"discriminator", &gan.discriminator}}) {
    const auto p = root / "models" / (std::string(name) + ".ckpt");
    save_checkpoint(*ck, p.string());
    st.record(p);
  }

  // 5. synthesis from phantom labels with one real style reference
  log::info("pipeline: synthesizing volumes");
  DatasetManifest synth;
  synth.base_dir = root.string();
  res.labels_carried = true;
  const Volume& style = real_subjects.front().image;
  for (int i = 0; i < cfg.synthetic_volumes; ++i) {
    const auto& src = xcat_subjects[static_cast<std::size_t>(i)].labels;
    infer::SynthOptions so;
    so.seed = derive_seed(cfg.seed, 40, i);
    auto r = infer::synthesize_volume(*gan.models.generator, *gan.models.encoder, src, &style,
                                      infer::SynthMode::eight_class, so);
    const std::string id = "syn" + std::to_string(i);
    r.image.subject_id = r.labels.subject_id = id;
    const auto img = "synthetic/" + id + "_img.nii.gz", lab = "synthetic/" + id + "_lab.nii.gz";
    nifti::write_volume(r.image, (root / img).string());
    nifti::write_labels(r.labels, (root / lab).string());
    st.record(root / img);
    st.record(root / lab);
    const auto back = nifti::read_labels((root / lab).string(), SchemeKind::EightClass);
    res.labels_carried = res.labels_carried && back.labels.values() == src.labels.values();
    auto e = row(img, lab, SchemeKind::EightClass, Role::train_net3, "synthetic-8class");
    e.provenance = {{"label_source", src.subject_id}, {"style_source", style.subject_id}, {"seed", so.seed}};
    synth.entries.push_back(std::move(e));
    write_montage(r.image, r.labels, (root / "synthetic" / (id + ".png")).string());
    st.record(root / "synthetic" / (id + ".png"));
  }
  save_rel_manifest(synth, root / "synthetic_manifest.json", st);

  // 6. network 3 on real + synthetic
  log::info("pipeline: training network 3");
  DatasetManifest net3_data = real;
  net3_data.entries.insert(net3_data.entries.end(), synth.entries.begin(), synth.entries.end());
  save_rel_manifest(net3_data, root / "net3_manifest.json", st);
  opts.log_path = (root / "models" / "net3.jsonl").string();
  auto net3 = train::train_segmentation(cfg.net3, net3_data, cfg.net3.augment, opts);
  save_checkpoint(net3.checkpoint, (root / "models" / "net3.ckpt").string());
  st.record(root / "models" / "net3.ckpt");

  // 7. evaluation and table
  log::info("pipeline: evaluating");
  std::vector<metrics::MetricsRow> rows;
  for (const auto& e : test.entries) {
    const auto img = nifti::read_volume(test.resolve(e.volume_path));
    const auto gt = nifti::read_labels(test.resolve(*e.labelmap_path), SchemeKind::FourClass);
    const auto pred = infer::segment_cardiac(*net3.model, img, cfg.net3.input_size);
    const auto p = "report/" + img.subject_id + "_pred.nii.gz";
    nifti::write_labels(pred, (root / p).string());
    st.record(root / p);
    auto r = metrics::evaluate(pred, gt, gt.spacing);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  res.report = metrics::make_report(std::move(rows));
  write_json_file((root / "report" / "metrics.json").string(), metrics::to_json(res.report));
  st.record(root / "report" / "metrics.json");

  TableRow tr;
  tr.section = "Augmentation";
  tr.real_name = "ACDC";
  tr.real_count = cfg.real_subjects;
  tr.synth_name = "8-class";
  tr.synth_count = cfg.synthetic_volumes;
  tr.test_names = {"ACDC"};
  std::array<TableCell, 3> cells{};
  for (const auto& a : res.report.aggregates) cells[static_cast<std::size_t>(a.cls)] = {a.mean_dsc, a.mean_hd_mm};
  tr.cells = {cells};
  res.table = emit_table({tr});
  std::ofstream(root / "report" / "table.csv") << res.table.csv;
  std::ofstream(root / "report" / "table.txt") << res.table.text;
  st.record(root / "report" / "table.csv");
  st.record(root / "report" / "table.txt");

  res.provenance = {{"config", to_json(cfg)},
                    {"artifacts", res.digests},
                    {"labels_carried", res.labels_carried},
                    {"net1_epochs", net1.state.epoch},
                    {"gan_epochs", gan.state.epoch},
                    {"net3_epochs", net3.state.epoch}};
  write_json_file((root / "provenance.json").string(), res.provenance);
  return res;
}

}  // namespace cardiosynth::bench
