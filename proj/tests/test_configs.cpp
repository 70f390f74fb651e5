#include <doctest.h>

#include <filesystem>
#include <set>
#include <string>

#include "cardiosynth/bench/bench.hpp"
#include "cardiosynth/bench/pipeline.hpp"
#include "cardiosynth/core/config.hpp"

using namespace cardiosynth;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(CARDIOSYNTH_SOURCE_DIR) / "configs";

Json file(const std::string& rel) { return read_json_file((kConfigs / rel).string()); }

}  // namespace

TEST_SUITE("configs") {
  TEST_CASE("shipped network configs equal the compiled defaults") {
    for (auto p : {Profile::desk, Profile::paper}) {
      const std::string d(to_string(p));
      CAPTURE(d);
      for (auto k : {NetworkKind::net1, NetworkKind::net3}) {
        const auto j = file(d + "/" + std::string(to_string(k)) + ".json");
        CHECK(seg_config_from_json(j) == SegTrainConfig::defaults(k, p));
        CHECK(j == to_json(SegTrainConfig::defaults(k, p)));
      }
      const auto g = file(d + "/gan.json");
      CHECK(gan_config_from_json(g) == GanTrainConfig::defaults(p));
      CHECK(g == to_json(GanTrainConfig::defaults(p)));
    }
    const auto pipe = file("desk/pipeline.json");
    CHECK(pipe == to_json(bench::PipelineConfig::desk()));
    CHECK(to_json(bench::pipeline_config_from_json(pipe)) == pipe);
  }

  TEST_CASE("one experiment spec per table row") {
    const auto specs = bench::table1_specs();
    const auto& table = bench::paper_table1();
    REQUIRE(specs.size() == table.size());
    std::set<std::string> names;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& s = specs[i];
      CAPTURE(s.name);
      names.insert(s.name);
      s.validate();
      CHECK(s.profile == Profile::paper);
      CHECK(s.section == table[i].section);
      CHECK(s.real_volume_count() == table[i].real_count);
      const int syn = s.synthetic_set.mode == bench::SyntheticMode::none ? 0 : s.synthetic_set.volume_count;
      CHECK(syn == table[i].synth_count);
      REQUIRE(s.test_sets.size() == 2);
      CHECK(s.test_sets[0].source_tag == "cCMR");
      CHECK(s.test_sets[1].source_tag == "ACDC");
      std::string real;
      for (const auto& r : s.real_sets) real += (real.empty() ? "" : "+") + r.source_tag;
      CHECK(real == table[i].real_name);
      CHECK(bench::load_experiment_spec((kConfigs / "paper" / "experiments" / (s.name + ".json")).string()) == s);
    }
    CHECK(names.size() == specs.size());
    int files = 0;
    for (const auto& e : fs::directory_iterator(kConfigs / "paper" / "experiments")) files += e.path().extension() == ".json";
    CHECK(files == static_cast<int>(specs.size()));
  }
}
