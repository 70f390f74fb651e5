#include "cardiosynth/bench/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <png.h>

#include "cardiosynth/core/digest.hpp"
#include "cardiosynth/core/error.hpp"
#include "cardiosynth/core/json_reader.hpp"
#include "cardiosynth/core/log.hpp"
#include "cardiosynth/core/nifti.hpp"
#include "cardiosynth/core/rng.hpp"
#include "cardiosynth/infer/infer.hpp"
#include "cardiosynth/preprocess/preprocess.hpp"

namespace cardiosynth::bench {

namespace fs = std::filesystem;

std::string_view to_string(SyntheticMode m) {
  switch (m) {
    case SyntheticMode::none: return "none";
    case SyntheticMode::four_class: return "four_class";
    case SyntheticMode::eight_class: return "eight_class";
  }
  return "?";
}

SyntheticMode synthetic_mode_from_string(std::string_view s) {
  if (s == "none") return SyntheticMode::none;
  if (s == "four_class" || s == "4-class") return SyntheticMode::four_class;
  if (s == "eight_class" || s == "8-class") return SyntheticMode::eight_class;
  throw ConfigError("unknown synthetic mode '" + std::string(s) + "'");
}

int RealSetSpec::resolved_count() const {
  if (!fraction) return volume_count;
  return static_cast<int>(std::llround(*fraction * of));
}

int ExperimentSpec::real_volume_count() const {
  int n = 0;
  for (const auto& r : real_sets) n += r.resolved_count();
  return n;
}

void ExperimentSpec::validate() const {
  if (name.empty()) throw ConfigError("experiment: name is required");
  if (real_sets.empty()) throw ConfigError("experiment " + name + ": at least one real set is required");
  if (test_sets.empty()) throw ConfigError("experiment " + name + ": at least one test set is required");
  for (const auto& r : real_sets) {
    if (r.source_tag.empty()) throw ConfigError("experiment " + name + ": real set without source_tag");
    if (r.fraction && (!(*r.fraction > 0.0 && *r.fraction <= 1.0) || r.of < 1))
      throw ConfigError("experiment " + name + ": fraction must lie in (0, 1] with 'of' >= 1");
    if (r.resolved_count() < 1) throw ConfigError("experiment " + name + ": real set resolves to no volumes");
  }
  for (const auto& t : test_sets)
    if (t.source_tag.empty() || t.volume_count < 1) throw ConfigError("experiment " + name + ": bad test set");
  if (synthetic_set.mode != SyntheticMode::none && synthetic_set.volume_count < 1)
    throw ConfigError("experiment " + name + ": synthetic volume_count must be >= 1");
  if (profile == Profile::paper) {
    const int n = real_volume_count();
    if (n != 200 && n != 120 && n != 80 && n != 40 && n != 100)
      throw ConfigError("experiment " + name + ": paper profile real volume count " + std::to_string(n) +
                        " is not one of 200, 120, 80, 40, 100");
    if (synthetic_set.mode != SyntheticMode::none && synthetic_set.volume_count != kSyntheticVolumes)
      throw ConfigError("experiment " + name + ": paper profile synthetic count must be 66");
    for (const auto& t : test_sets)
      if (t.volume_count != kTestVolumes) throw ConfigError("experiment " + name + ": paper test sets hold 50 volumes");
  }
}

Json to_json(const ExperimentSpec& s) {
  Json reals = Json::array(), tests = Json::array();
  for (const auto& r : s.real_sets) {
    Json j{{"source_tag", r.source_tag}};
    if (r.fraction) {
      j["fraction"] = *r.fraction;
      j["of"] = r.of;
    } else {
      j["volume_count"] = r.volume_count;
    }
    reals.push_back(j);
  }
  for (const auto& t : s.test_sets) tests.push_back({{"source_tag", t.source_tag}, {"volume_count", t.volume_count}});
  return {{"name", s.name},
          {"section", s.section},
          {"profile", to_string(s.profile)},
          {"real_sets", reals},
          {"synthetic_set", {{"mode", to_string(s.synthetic_set.mode)}, {"volume_count", s.synthetic_set.volume_count}}},
          {"test_sets", tests},
          {"seed", s.seed}};
}

ExperimentSpec experiment_spec_from_json(const Json& j) {
  ExperimentSpec s;
  JsonReader r(j, "experiment");
  r.get("name", s.name);
  r.get("section", s.section);
  r.get_with("profile", [&](const Json& v) { s.profile = profile_from_string(v.get<std::string>()); });
  r.get("seed", s.seed);
  r.get_with("real_sets", [&](const Json& arr) {
    for (const auto& e : arr) {
      RealSetSpec rs;
      JsonReader er(e, "experiment.real_sets[]");
      er.get("source_tag", rs.source_tag);
      er.get("volume_count", rs.volume_count);
      er.get_with("fraction", [&](const Json& v) { rs.fraction = v.get<double>(); });
      er.get("of", rs.of);
      er.finish();
      s.real_sets.push_back(rs);
    }
  });
  r.get_with("synthetic_set", [&](const Json& v) {
    JsonReader sr(v, "experiment.synthetic_set");
    sr.get_with("mode", [&](const Json& m) { s.synthetic_set.mode = synthetic_mode_from_string(m.get<std::string>()); });
    sr.get("volume_count", s.synthetic_set.volume_count);
    sr.finish();
  });
  r.get_with("test_sets", [&](const Json& arr) {
    for (const auto& e : arr) {
      TestSetSpec ts;
      JsonReader tr(e, "experiment.test_sets[]");
      tr.get("source_tag", ts.source_tag);
      tr.get("volume_count", ts.volume_count);
      tr.finish();
      s.test_sets.push_back(ts);
    }
  });
  r.finish();
  s.validate();
  return s;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("experiment spec not found: " + path);
  try {
    return experiment_spec_from_json(read_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

namespace {

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.next_u64() % i]);
}

// Seeded draw of `n` label indices alternating ED / ES while both remain.
std::vector<int> draw_labels(const std::vector<Phase>& phases, int n, std::uint64_t seed) {
  if (static_cast<int>(phases.size()) < n)
    throw ConfigError("label pool has " + std::to_string(phases.size()) + " volumes, " + std::to_string(n) +
                      " are required");
  Rng rng(derive_seed(seed, 0x4c4142ULL));
  std::vector<int> ed, es, other;
  for (int i = 0; i < static_cast<int>(phases.size()); ++i)
    (phases[i] == Phase::ED ? ed : phases[i] == Phase::ES ? es : other).push_back(i);
  shuffle(ed, rng);
  shuffle(es, rng);
  shuffle(other, rng);
  std::vector<int> out;
  std::size_t a = 0, b = 0, c = 0;
  while (static_cast<int>(out.size()) < n) {
    const bool take_ed = out.size() % 2 == 0;
    if (take_ed && a < ed.size())
      out.push_back(ed[a++]);
    else if (b < es.size())
      out.push_back(es[b++]);
    else if (a < ed.size())
      out.push_back(ed[a++]);
    else
      out.push_back(other[c++]);
  }
  return out;
}

}  // namespace

std::vector<SynthAssignment> plan_synthetic_set(SyntheticMode mode, const std::vector<Phase>& label_phases,
                                                const std::vector<std::string>& style_tags, int volume_count,
                                                std::uint64_t seed) {
  std::vector<SynthAssignment> out;
  if (mode == SyntheticMode::none) return out;
  if (volume_count < 1) throw ConfigError("synthetic set: volume_count must be >= 1");
  if (style_tags.empty()) throw ConfigError("synthetic set: at least one style source is required");
  if (mode == SyntheticMode::four_class) {
    const int k = static_cast<int>(style_tags.size());
    if (volume_count % k)
      throw ConfigError("four_class set: " + std::to_string(volume_count) + " volumes do not split over " +
                        std::to_string(k) + " styles");
    const auto labels = draw_labels(label_phases, volume_count / k, seed);
    for (const auto& tag : style_tags)
      for (int l : labels) out.push_back({l, tag});
  } else {
    if (style_tags.size() != 1) throw ConfigError("eight_class set uses exactly one style reference");
    for (int l : draw_labels(label_phases, volume_count, seed)) out.push_back({l, style_tags.front()});
  }
  return out;
}

DatasetManifest assemble_synthetic_set(SyntheticMode mode, const std::vector<LabelSource>& label_pool,
                                       const std::vector<StyleSource>& styles, const Checkpoint& gen,
                                       const Checkpoint& enc, int volume_count, std::uint64_t seed,
                                       const std::string& out_dir) {
  std::vector<Phase> phases;
  for (const auto& l : label_pool) phases.push_back(l.labels.phase);
  std::vector<std::string> tags;
  for (const auto& s : styles) tags.push_back(s.tag);
  const auto plan = plan_synthetic_set(mode, phases, tags, volume_count, seed);
  fs::create_directories(out_dir);
  auto g = train::load_generator(gen);
  auto e = train::load_encoder(enc);
  const auto smode = mode == SyntheticMode::four_class ? infer::SynthMode::four_class : infer::SynthMode::eight_class;
  DatasetManifest m;
  m.base_dir = fs::absolute(out_dir).string();
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& a = plan[i];
    const auto& src = label_pool[static_cast<std::size_t>(a.label_index)];
    const auto style = std::find_if(styles.begin(), styles.end(), [&](const StyleSource& s) { return s.tag == a.style_tag; });
    infer::SynthOptions so;
    so.seed = derive_seed(seed, i);
    auto r = infer::synthesize_volume(*g, *e, src.labels, &style->image, smode, so);
    char stem[64];
    std::snprintf(stem, sizeof stem, "syn_%03zu", i);
    r.image.subject_id = r.labels.subject_id = stem;
    nifti::write_volume(r.image, (fs::path(out_dir) / (std::string(stem) + "_img.nii.gz")).string());
    nifti::write_labels(r.labels, (fs::path(out_dir) / (std::string(stem) + "_lab.nii.gz")).string());
    ManifestEntry entry;
    entry.volume_path = std::string(stem) + "_img.nii.gz";
    entry.labelmap_path = std::string(stem) + "_lab.nii.gz";
    entry.scheme = r.labels.scheme;
    entry.role = Role::train_net3;
    entry.source_tag = mode == SyntheticMode::four_class ? "synthetic-4class" : "synthetic-8class";
    entry.provenance = {{"label_source", src.id},
                        {"style_source", a.style_tag},
                        {"mode", to_string(mode)},
                        {"generator_digest", gen.digest},
                        {"seed", so.seed}};
    m.entries.push_back(std::move(entry));
  }
  return m;
}

namespace {

std::vector<ManifestEntry> pick(const DatasetManifest& pool, Role role, const std::string& tag, int n,
                                std::uint64_t seed, const std::string& what) {
  std::vector<ManifestEntry> cands;
  for (auto e : pool.with_role(role))
    if (tag.empty() || e.source_tag == tag) {
      e.volume_path = fs::absolute(pool.resolve(e.volume_path)).string();
      if (e.labelmap_path) e.labelmap_path = fs::absolute(pool.resolve(*e.labelmap_path)).string();
      cands.push_back(std::move(e));
    }
  if (static_cast<int>(cands.size()) < n)
    throw ConfigError(what + " '" + tag + "' needs " + std::to_string(n) + " volumes, pool has " +
                      std::to_string(cands.size()));
  Rng rng(seed);
  shuffle(cands, rng);
  cands.resize(static_cast<std::size_t>(n));
  return cands;
}

}  // namespace

DatasetManifest build_training_manifest(const ExperimentSpec& spec, const ExperimentEnv& env) {
  spec.validate();
  DatasetManifest m;
  std::uint64_t k = 0;
  for (const auto& r : spec.real_sets) {
    // "cCMR+ACDC" draws from every listed tag in turn.
    std::vector<std::string> tags;
    std::stringstream ss(r.source_tag);
    for (std::string t; std::getline(ss, t, '+');) {
      t.erase(std::remove(t.begin(), t.end(), ' '), t.end());
      tags.push_back(t);
    }
    const int n = r.resolved_count();
    for (std::size_t i = 0; i < tags.size(); ++i) {
      const int share = n / static_cast<int>(tags.size()) + (static_cast<int>(i) < n % static_cast<int>(tags.size()));
      auto rows = pick(env.real_pool, Role::train_net3, tags[i], share, derive_seed(spec.seed, 1, k++), "real set");
      m.entries.insert(m.entries.end(), rows.begin(), rows.end());
    }
  }
  if (spec.synthetic_set.mode != SyntheticMode::none) {
    const auto it = env.synthetic.find(spec.synthetic_set.mode);
    if (it == env.synthetic.end())
      throw ConfigError("experiment " + spec.name + ": no " + std::string(to_string(spec.synthetic_set.mode)) +
                        " synthetic set available");
    auto rows = pick(it->second, Role::train_net3, "", spec.synthetic_set.volume_count, derive_seed(spec.seed, 2),
                     "synthetic set");
    m.entries.insert(m.entries.end(), rows.begin(), rows.end());
  }
  return m;
}

DatasetManifest build_test_manifest(const ExperimentSpec& spec, const ExperimentEnv& env, const TestSetSpec& test) {
  DatasetManifest m;
  m.entries = pick(env.test_pool, Role::test_net3, test.source_tag, test.volume_count, derive_seed(spec.seed, 3),
                   "test set");
  return m;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const ExperimentEnv& env) {
  ExperimentResult res;
  res.spec = spec;
  res.training_manifest = build_training_manifest(spec, env);
  const fs::path dir = fs::path(env.work_dir) / spec.name;
  fs::create_directories(dir);
  save_manifest(res.training_manifest, (dir / "train_manifest.json").string());

  SegTrainConfig cfg = env.net3;
  cfg.seed = spec.seed;
  auto tr = train::train_segmentation(cfg, res.training_manifest, cfg.augment, env.train_options);
  const auto ckpt_path = (dir / "net3.ckpt").string();
  save_checkpoint(tr.checkpoint, ckpt_path);

  Json test_digests = Json::object();
  for (const auto& t : spec.test_sets) {
    const auto tm = build_test_manifest(spec, env, t);
    std::vector<metrics::MetricsRow> rows;
    for (const auto& e : tm.entries) {
      const Volume vol = nifti::read_volume(e.volume_path);
      LabelMap gt = nifti::read_labels(*e.labelmap_path, e.scheme);
      if (gt.scheme == SchemeKind::EightClass) gt = preprocess::to_four_class(gt);
      const LabelMap pred = infer::segment_cardiac(*tr.model, vol, cfg.input_size);
      auto r = metrics::evaluate(pred, gt, gt.spacing);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    TestSetResult out{t.source_tag, metrics::make_report(std::move(rows))};
    const auto path = (dir / ("report_" + t.source_tag + ".json")).string();
    write_json_file(path, metrics::to_json(out.report));
    test_digests[t.source_tag] = file_digest(path);
    res.tests.push_back(std::move(out));
  }
  res.provenance = {{"spec", to_json(spec)},
                    {"net3_config", to_json(cfg)},
                    {"training_manifest_digest", sha256_hex(to_json(res.training_manifest).dump())},
                    {"real_volumes", spec.real_volume_count()},
                    {"synthetic_volumes",
                     spec.synthetic_set.mode == SyntheticMode::none ? 0 : spec.synthetic_set.volume_count},
                    {"checkpoint_digest", tr.checkpoint.digest},
                    {"report_digests", test_digests}};
  write_json_file((dir / "result.json").string(), to_json(res));
  return res;
}

Json to_json(const ExperimentResult& r) {
  Json tests = Json::array();
  for (const auto& t : r.tests) tests.push_back({{"source_tag", t.source_tag}, {"report", metrics::to_json(t.report)}});
  return {{"spec", to_json(r.spec)}, {"tests", tests}, {"provenance", r.provenance}};
}

namespace {

std::string synth_label(SyntheticMode m) {
  switch (m) {
    case SyntheticMode::none: return "-";
    case SyntheticMode::four_class: return "4-class";
    case SyntheticMode::eight_class: return "8-class";
  }
  return "-";
}

std::array<TableCell, 3> cells_of(const metrics::MetricsReport& rep) {
  std::array<TableCell, 3> c{};
  for (const auto& a : rep.aggregates) c[static_cast<std::size_t>(a.cls)] = {a.mean_dsc, a.mean_hd_mm};
  return c;
}

std::string fmt2(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2f", v);
  return b;
}

std::string pad(const std::string& s, std::size_t w, bool right = true) {
  if (s.size() >= w) return s;
  return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
}

}  // namespace

TableRow table_row(const ExperimentResult& r) {
  TableRow row;
  row.section = r.spec.section;
  std::string names;
  for (const auto& rs : r.spec.real_sets) names += (names.empty() ? "" : "+") + rs.source_tag;
  row.real_name = names;
  row.real_count = r.spec.real_volume_count();
  row.synth_name = synth_label(r.spec.synthetic_set.mode);
  row.synth_count = r.spec.synthetic_set.mode == SyntheticMode::none ? 0 : r.spec.synthetic_set.volume_count;
  for (const auto& t : r.tests) {
    row.test_names.push_back(t.source_tag);
    row.cells.push_back(cells_of(t.report));
  }
  return row;
}

TableRow table_row_from_json(const Json& j) {
  try {
    ExperimentResult r;
    r.spec = experiment_spec_from_json(j.at("spec"));
    for (const auto& t : j.at("tests"))
      r.tests.push_back({t.at("source_tag").get<std::string>(), metrics::report_from_json(t.at("report"))});
    return table_row(r);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("experiment result: ") + e.what());
  }
}

RenderedTable emit_table(const std::vector<TableRow>& rows) {
  if (rows.empty()) throw ValueError("emit_table: no rows");
  const auto& tests = rows.front().test_names;
  for (const auto& r : rows) {
    if (r.test_names != tests || r.cells.size() != tests.size())
      throw FormatError("emit_table: rows report different test sets");
  }
  RenderedTable out;
  std::ostringstream csv, txt;
  csv << "section,real_set,real_volumes,synthetic_set,synthetic_volumes";
  for (const auto& t : tests)
    for (const char* c : {"LV", "MYO", "RV"}) csv << ',' << t << '_' << c << "_DSC," << t << '_' << c << "_HD";
  csv << '\n';

  std::size_t wsec = 4, wname = 8, wsyn = 9;
  for (const auto& r : rows) {
    wsec = std::max(wsec, r.section.size());
    wname = std::max(wname, r.real_name.size());
    wsyn = std::max(wsyn, r.synth_name.size());
  }
  txt << pad("Exp.", wsec, false) << "  " << pad("Real Set", wname, false) << ' ' << pad("#Vol", 4) << "  "
      << pad("Synthetic", wsyn, false) << ' ' << pad("#Vol", 4);
  for (const auto& t : tests) txt << " | " << pad(t, 34, false);
  txt << '\n' << std::string(wsec + wname + wsyn + 14, ' ');
  for (std::size_t i = 0; i < tests.size(); ++i) txt << " | " << pad("LV DSC HD  MYO DSC HD  RV DSC HD", 34, false);
  txt << '\n';

  for (const auto& r : rows) {
    const std::string rc = std::to_string(r.real_count);
    const std::string sc = r.synth_count ? std::to_string(r.synth_count) : "-";
    csv << r.section << ',' << r.real_name << ',' << rc << ',' << r.synth_name << ',' << sc;
    txt << pad(r.section, wsec, false) << "  " << pad(r.real_name, wname, false) << ' ' << pad(rc, 4) << "  "
        << pad(r.synth_name, wsyn, false) << ' ' << pad(sc, 4);
    for (const auto& cs : r.cells) {
      txt << " |";
      for (const auto& c : cs) {
        csv << ',' << fmt2(c.dsc) << ',' << fmt2(c.hd);
        txt << ' ' << fmt2(c.dsc) << ' ' << fmt2(c.hd);
      }
    }
    csv << '\n';
    txt << '\n';
  }
  out.csv = csv.str();
  out.text = txt.str();
  return out;
}

const std::vector<TableRow>& paper_table1() {
  static const std::vector<TableRow> rows = [] {
    const std::vector<std::string> tests{"cCMR", "ACDC"};
    struct Raw {
      const char* section;
      const char* real;
      int n;
      const char* syn;
      int ns;
      double v[12];
    };
    const Raw raw[] = {
        {"Augmentation", "cCMR", 100, "-", 0, {0.91, 10.11, 0.84, 13.74, 0.88, 11.73, 0.86, 12.57, 0.80, 14.61, 0.87, 22.73}},
        {"Augmentation", "cCMR", 100, "4-class", 66, {0.93, 10.73, 0.86, 13.98, 0.89, 9.94, 0.90, 14.25, 0.90, 15.54, 0.86, 16.72}},
        {"Augmentation", "cCMR", 100, "8-class", 66, {0.94, 9.84, 0.86, 8.06, 0.89, 8.08, 0.91, 12.98, 0.91, 13.40, 0.87, 11.87}},
        {"Augmentation", "ACDC", 100, "-", 0, {0.88, 20.46, 0.81, 31.26, 0.82, 26.28, 0.94, 11.21, 0.90, 12.94, 0.92, 14.14}},
        {"Augmentation", "ACDC", 100, "4-class", 66, {0.88, 33.50, 0.81, 41.39, 0.84, 20.59, 0.95, 11.81, 0.91, 12.25, 0.94, 11.87}},
        {"Augmentation", "ACDC", 100, "8-class", 66, {0.89, 21.84, 0.82, 25.71, 0.84, 18.89, 0.96, 9.73, 0.92, 11.91, 0.93, 10.67}},
        {"Real Data Reduction", "cCMR+ACDC", 200, "-", 0, {0.93, 9.84, 0.85, 13.79, 0.89, 10.63, 0.95, 8.71, 0.90, 11.33, 0.91, 12.86}},
        {"Real Data Reduction", "cCMR+ACDC", 200, "4-class", 66, {0.93, 12.15, 0.85, 15.27, 0.89, 12.93, 0.95, 9.51, 0.91, 15.99, 0.92, 16.63}},
        {"Real Data Reduction", "cCMR+ACDC", 200, "8-class", 66, {0.93, 9.89, 0.86, 13.22, 0.89, 9.43, 0.95, 7.99, 0.92, 9.07, 0.92, 10.32}},
        {"Real Data Reduction", "cCMR+ACDC", 120, "-", 0, {0.90, 12.11, 0.83, 15.73, 0.86, 14.39, 0.94, 9.14, 0.89, 15.08, 0.88, 16.35}},
        {"Real Data Reduction", "cCMR+ACDC", 120, "4-class", 66, {0.92, 10.64, 0.85, 14.27, 0.87, 12.20, 0.95, 10.12, 0.90, 12.77, 0.92, 12.21}},
        {"Real Data Reduction", "cCMR+ACDC", 120, "8-class", 66, {0.92, 9.98, 0.85, 13.27, 0.89, 10.11, 0.95, 8.89, 0.91, 11.31, 0.93, 12.08}},
        {"Real Data Reduction", "cCMR+ACDC", 80, "-", 0, {0.87, 17.22, 0.82, 18.01, 0.86, 15.76, 0.92, 16.51, 0.87, 17.22, 0.87, 18.11}},
        {"Real Data Reduction", "cCMR+ACDC", 80, "4-class", 66, {0.92, 21.34, 0.85, 24.77, 0.88, 18.77, 0.93, 16.75, 0.89, 19.57, 0.89, 19.15}},
        {"Real Data Reduction", "cCMR+ACDC", 80, "8-class", 66, {0.92, 14.67, 0.85, 18.82, 0.88, 11.72, 0.94, 11.30, 0.91, 12.79, 0.90, 14.76}},
        {"Real Data Reduction", "cCMR+ACDC", 40, "-", 0, {0.85, 21.13, 0.79, 22.69, 0.83, 18.91, 0.89, 19.74, 0.85, 19.11, 0.85, 20.05}},
        {"Real Data Reduction", "cCMR+ACDC", 40, "4-class", 66, {0.90, 26.29, 0.82, 38.73, 0.85, 24.42, 0.92, 22.79, 0.89, 27.13, 0.88, 28.33}},
        {"Real Data Reduction", "cCMR+ACDC", 40, "8-class", 66, {0.91, 16.28, 0.84, 19.04, 0.87, 13.75, 0.94, 15.49, 0.90, 15.76, 0.90, 17.38}},
    };
    std::vector<TableRow> out;
    for (const auto& r : raw) {
      TableRow row;
      row.section = r.section;
      row.real_name = r.real;
      row.real_count = r.n;
      row.synth_name = r.syn;
      row.synth_count = r.ns;
      row.test_names = tests;
      for (int t = 0; t < 2; ++t) {
        std::array<TableCell, 3> c{};
        for (int k = 0; k < 3; ++k) c[k] = {r.v[t * 6 + 2 * k], r.v[t * 6 + 2 * k + 1]};
        row.cells.push_back(c);
      }
      out.push_back(std::move(row));
    }
    return out;
  }();
  return rows;
}

std::vector<ExperimentSpec> table1_specs() {
  std::vector<ExperimentSpec> out;
  const std::pair<SyntheticMode, const char*> modes[] = {
      {SyntheticMode::none, "real"}, {SyntheticMode::four_class, "4class"}, {SyntheticMode::eight_class, "8class"}};
  auto base = [&](SyntheticMode m) {
    ExperimentSpec s;
    s.synthetic_set.mode = m;
    s.test_sets = {{"cCMR", kTestVolumes}, {"ACDC", kTestVolumes}};
    return s;
  };
  for (const char* tag : {"cCMR", "ACDC"})
    for (const auto& [m, suffix] : modes) {
      auto s = base(m);
      s.name = std::string("aug_") + (tag[0] == 'c' ? "ccmr" : "acdc") + "_" + suffix;
      s.real_sets = {{tag, 100, std::nullopt, 0}};
      out.push_back(s);
    }
  for (int n : {200, 120, 80, 40})
    for (const auto& [m, suffix] : modes) {
      auto s = base(m);
      s.section = "Real Data Reduction";
      s.name = "reduction_" + std::to_string(n) + "_" + suffix;
      for (const char* tag : {"cCMR", "ACDC"}) {
        if (n == 200)
          s.real_sets.push_back({tag, 100, std::nullopt, 0});
        else
          s.real_sets.push_back({tag, 0, n / 200.0, 100});
      }
      out.push_back(s);
    }
  return out;
}

const std::vector<ReferenceDice>& acdc_reference_dice() {
  static const std::vector<ReferenceDice> r{{Phase::ED, 0.968, 0.946, 0.902}, {Phase::ES, 0.931, 0.889, 0.919}};
  return r;
}

std::string format_reference_dice(const ReferenceDice& r) {
  char b[64];
  std::snprintf(b, sizeof b, "%.3f, %.3f and %.3f", r.lv, r.rv, r.myo);
  return b;
}

std::vector<int> montage_slices(int available, int n_slices) {
  if (available < 1 || n_slices < 1) throw ValueError("montage: need at least one slice");
  const int n = std::min(available, n_slices);
  std::vector<int> idx;
  for (int i = 0; i < n; ++i)
    idx.push_back(n == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(i) * (available - 1) / (n - 1))));
  return idx;
}

namespace {

constexpr std::uint8_t kPalette[8][3] = {{0, 0, 0},     {200, 160, 120}, {80, 160, 255}, {150, 90, 40},
                                         {120, 200, 80}, {60, 80, 230},  {240, 200, 40}, {230, 40, 40}};
constexpr std::uint8_t kPalette4[4][3] = {{0, 0, 0}, {60, 80, 230}, {240, 200, 40}, {230, 40, 40}};

void png_append(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

}  // namespace

std::vector<std::uint8_t> montage_png(const Volume& vol, const LabelMap& labels, int n_slices) {
  if (!(vol.shape() == labels.shape())) throw ShapeError("montage: image and labels differ in shape");
  const Shape3 s = vol.shape();
  const auto idx = montage_slices(s.slices, n_slices);
  const int W = s.cols * static_cast<int>(idx.size()), H = 2 * s.rows;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(W) * H * 3);
  for (std::size_t col = 0; col < idx.size(); ++col)
    for (int r = 0; r < s.rows; ++r)
      for (int c = 0; c < s.cols; ++c) {
        const double v = std::clamp(vol.voxels(idx[col], r, c), -1.0, 1.0);
        const auto g = static_cast<std::uint8_t>(std::lround((v + 1.0) * 127.5));
        const std::size_t x = col * s.cols + c;
        std::uint8_t* top = &rgb[(static_cast<std::size_t>(r) * W + x) * 3];
        std::uint8_t* bot = &rgb[(static_cast<std::size_t>(r + s.rows) * W + x) * 3];
        top[0] = top[1] = top[2] = g;
        const int l = labels.labels(idx[col], r, c);
        const std::uint8_t* p = labels.scheme == SchemeKind::FourClass ? kPalette4[l & 3] : kPalette[l & 7];
        for (int k = 0; k < 3; ++k) bot[k] = l ? static_cast<std::uint8_t>((g + p[k]) / 2) : g;
      }
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw Error("montage: libpng initialisation failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("montage: PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_append, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 9);
  png_write_info(png, info);
  for (int r = 0; r < H; ++r) png_write_row(png, &rgb[static_cast<std::size_t>(r) * W * 3]);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_montage(const Volume& vol, const LabelMap& labels, const std::string& path, int n_slices) {
  const auto bytes = montage_png(vol, labels, n_slices);
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot write " + path);
  const bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
  std::fclose(f);
  if (!ok) throw Error("short write to " + path);
}

}  // namespace cardiosynth::bench
