#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "cardiosynth/bench/bench.hpp"
#include "cardiosynth/core/config.hpp"
#include "cardiosynth/metrics/metrics.hpp"
#include "cardiosynth/phantom/phantom.hpp"

namespace cardiosynth::bench {

/// Desk-scale run of the whole chain on phantom stand-ins.
struct PipelineConfig {
  std::uint64_t seed = 1;
  int xcat_subjects = 4;
  int real_subjects = 4;
  int test_subjects = 2;
  int slices = 8;
  int synthetic_volumes = 2;
  /// Phantoms are rendered at this size and resampled to the network grid.
  int native_size = 80;
  double native_mm = 4.16;
  double target_mm = 5.2;
  SegTrainConfig net1 = SegTrainConfig::defaults(NetworkKind::net1, Profile::desk);
  GanTrainConfig gan = GanTrainConfig::defaults(Profile::desk);
  SegTrainConfig net3 = SegTrainConfig::defaults(NetworkKind::net3, Profile::desk);
  /// Contrast of the "real" stand-ins; differs from the simulated one.
  phantom::TissueSignalTable real_contrast = real_style_contrast();

  static phantom::TissueSignalTable real_style_contrast();
  /// Epoch budgets sized for a CPU run.
  static PipelineConfig desk();
  void validate() const;
};

Json to_json(const PipelineConfig& c);
PipelineConfig pipeline_config_from_json(const Json& j);

struct PipelineResult {
  metrics::MetricsReport report;
  RenderedTable table;
  /// Relative artifact path -> SHA-256; JSONL logs excluded.
  std::map<std::string, std::string> digests;
  bool labels_carried = false;
  Json provenance = Json::object();
};

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::string& work_dir);

}  // namespace cardiosynth::bench
