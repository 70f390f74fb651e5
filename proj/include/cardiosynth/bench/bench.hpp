#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cardiosynth/core/checkpoint.hpp"
#include "cardiosynth/core/config.hpp"
#include "cardiosynth/core/manifest.hpp"
#include "cardiosynth/metrics/metrics.hpp"
#include "cardiosynth/train/train.hpp"

namespace cardiosynth::bench {

enum class SyntheticMode { none, four_class, eight_class };
std::string_view to_string(SyntheticMode m);
SyntheticMode synthetic_mode_from_string(std::string_view s);

inline constexpr int kSyntheticVolumes = 66;
inline constexpr int kTestVolumes = 50;

struct RealSetSpec {
  std::string source_tag;
  int volume_count = 0;
  /// Alternative form: a fraction of a baseline count.
  std::optional<double> fraction;
  int of = 0;

  int resolved_count() const;
  bool operator==(const RealSetSpec&) const = default;
};

struct SyntheticSetSpec {
  SyntheticMode mode = SyntheticMode::none;
  int volume_count = kSyntheticVolumes;
  bool operator==(const SyntheticSetSpec&) const = default;
};

struct TestSetSpec {
  std::string source_tag;
  int volume_count = kTestVolumes;
  bool operator==(const TestSetSpec&) const = default;
};

struct ExperimentSpec {
  std::string name;
  /// "Augmentation" or "Real Data Reduction".
  std::string section = "Augmentation";
  std::vector<RealSetSpec> real_sets;
  SyntheticSetSpec synthetic_set;
  std::vector<TestSetSpec> test_sets;
  std::uint64_t seed = 0;
  Profile profile = Profile::paper;

  int real_volume_count() const;
  /// Paper profile enforces the Table-1 counts.
  void validate() const;
  bool operator==(const ExperimentSpec&) const = default;
};

Json to_json(const ExperimentSpec& s);
ExperimentSpec experiment_spec_from_json(const Json& j);
/// Throws ConfigError naming the path when it is missing or malformed.
ExperimentSpec load_experiment_spec(const std::string& path);

struct SynthAssignment {
  int label_index = 0;
  std::string style_tag;
  bool operator==(const SynthAssignment&) const = default;
};

/// four_class: volume_count / n_styles label volumes, each paired with every style;
/// eight_class: volume_count label volumes with the single style. Labels are drawn
/// with the seed, alternating ED and ES.
std::vector<SynthAssignment> plan_synthetic_set(SyntheticMode mode, const std::vector<Phase>& label_phases,
                                                const std::vector<std::string>& style_tags, int volume_count,
                                                std::uint64_t seed);

struct LabelSource {
  std::string id;
  LabelMap labels;  // EightClass
};

struct StyleSource {
  std::string tag;
  Volume image;
};

/// Synthesizes the planned volumes into `out_dir` and returns a manifest of train_net3 rows.
DatasetManifest assemble_synthetic_set(SyntheticMode mode, const std::vector<LabelSource>& label_pool,
                                       const std::vector<StyleSource>& styles, const Checkpoint& gen,
                                       const Checkpoint& enc, int volume_count, std::uint64_t seed,
                                       const std::string& out_dir);

struct ExperimentEnv {
  DatasetManifest real_pool;   // train_net3 rows, selected by source tag
  DatasetManifest test_pool;   // test_net3 rows
  std::map<SyntheticMode, DatasetManifest> synthetic;
  SegTrainConfig net3 = SegTrainConfig::defaults(NetworkKind::net3);
  std::string work_dir;
  train::TrainOptions train_options;
};

struct TestSetResult {
  std::string source_tag;
  metrics::MetricsReport report;
};

struct ExperimentResult {
  ExperimentSpec spec;
  DatasetManifest training_manifest;
  std::vector<TestSetResult> tests;
  Json provenance = Json::object();
};

/// Seeded selection of real, synthetic and test rows; paths are made absolute.
DatasetManifest build_training_manifest(const ExperimentSpec& spec, const ExperimentEnv& env);
DatasetManifest build_test_manifest(const ExperimentSpec& spec, const ExperimentEnv& env, const TestSetSpec& test);
ExperimentResult run_experiment(const ExperimentSpec& spec, const ExperimentEnv& env);
Json to_json(const ExperimentResult& r);

struct TableCell {
  double dsc = 0.0;
  double hd = 0.0;
};

struct TableRow {
  std::string section;
  std::string real_name;
  int real_count = 0;
  std::string synth_name = "-";
  int synth_count = 0;
  std::vector<std::string> test_names;
  /// cells[test][LV, MYO, RV]
  std::vector<std::array<TableCell, 3>> cells;
};

struct RenderedTable {
  std::string csv;
  std::string text;
};

RenderedTable emit_table(const std::vector<TableRow>& rows);
TableRow table_row(const ExperimentResult& r);
TableRow table_row_from_json(const Json& experiment_result);
/// Stored Table 1 values.
const std::vector<TableRow>& paper_table1();
/// One spec per Table-1 row, in table order; reduced real sets use the fraction form.
std::vector<ExperimentSpec> table1_specs();

struct ReferenceDice {
  Phase phase;
  double lv, rv, myo;
};
const std::vector<ReferenceDice>& acdc_reference_dice();
/// e.g. "0.968, 0.946 and 0.902" (LV, RV, MYO).
std::string format_reference_dice(const ReferenceDice& r);

std::vector<int> montage_slices(int available, int n_slices);
/// RGB PNG: image row above label-overlay row, one column per selected slice.
std::vector<std::uint8_t> montage_png(const Volume& vol, const LabelMap& labels, int n_slices = 10);
void write_montage(const Volume& vol, const LabelMap& labels, const std::string& path, int n_slices = 10);

}  // namespace cardiosynth::bench
