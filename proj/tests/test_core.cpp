#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "cardiosynth/core/checkpoint.hpp"
#include "cardiosynth/core/config.hpp"
#include "cardiosynth/core/digest.hpp"
#include "cardiosynth/core/error.hpp"
#include "cardiosynth/core/manifest.hpp"
#include "cardiosynth/core/nifti.hpp"
#include "cardiosynth/core/rng.hpp"
#include "cardiosynth/core/types.hpp"
#include "support/tmp_dir.hpp"

using namespace cardiosynth;
namespace fs = std::filesystem;
using test_support::tmp_dir;

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// pixdim is stored as float32
bool same_spacing(const Spacing& a, const Spacing& b) {
  auto f = [](double x) { return static_cast<double>(static_cast<float>(x)); };
  return f(a.row_mm) == f(b.row_mm) && f(a.col_mm) == f(b.col_mm) && f(a.slice_mm) == f(b.slice_mm);
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

ManifestEntry entry(Role role, bool labels, const std::string& tag = "x") {
  ManifestEntry e;
  e.volume_path = tag + ".nii.gz";
  if (labels) e.labelmap_path = tag + "_lab.nii.gz";
  e.role = role;
  e.source_tag = tag;
  return e;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("spacing and grids validate their invariants") {
    CHECK_NOTHROW(Spacing(1.3, 1.3, 8.0));
    CHECK_THROWS_AS(Spacing(0.0, 1.3, 8.0), ConfigError);
    CHECK_THROWS_AS(Spacing(1.3, -1.0, 8.0), ConfigError);
    CHECK_THROWS_AS(Spacing(1.3, 1.3, std::nan("")), ConfigError);
    CHECK(kTargetInplaneMm == 1.3);
    CHECK_THROWS_AS(Grid3<double>(Shape3{0, 4, 4}), ShapeError);
    CHECK_THROWS_AS(Grid3<double>(Shape3{1, 2, 2}, std::vector<double>(3)), ShapeError);

    Volume v;
    v.voxels = Grid3<double>(Shape3{1, 2, 2}, std::vector<double>{-1, 0, 0.5, 1});
    v.normalized = true;
    CHECK_NOTHROW(v.validate());
    v.voxels(0, 1, 1) = 1.0001;
    CHECK_THROWS_AS(v.validate(), ShapeError);
    v.normalized = false;
    CHECK_NOTHROW(v.validate());
  }

  TEST_CASE("label schemes") {
    const auto& four = LabelScheme::four_class();
    const auto& eight = LabelScheme::eight_class();
    CHECK(four.num_classes() == 4);
    CHECK(eight.num_classes() == 8);
    const std::vector<std::string> t4{"background", "RV", "MYO", "LV"};
    const std::vector<std::string> t8{"background", "body tissue", "lung", "liver", "abdominal organ", "RV", "MYO", "LV"};
    for (int i = 0; i < 4; ++i) {
      CHECK(four.tissue(i) == t4[i]);
      CHECK(to_scheme_code(t4[i], four) == i);
    }
    for (int i = 0; i < 8; ++i) {
      CHECK(eight.tissue(i) == t8[i]);
      CHECK(to_scheme_code(t8[i], eight) == i);
    }
    CHECK(to_scheme_code("background", four) == 0);
    CHECK(to_scheme_code("LV", eight) == 7);
    CHECK_THROWS_AS(to_scheme_code("liver", four), ConfigError);
    CHECK_THROWS_AS(four.tissue(4), ConfigError);
    CHECK(four::LV == 3);
    CHECK(eight::MYO == 6);
  }

  TEST_CASE("manifest validation over role and label presence") {
    for (Role r : {Role::train_net1, Role::train_gan, Role::style_only, Role::train_net3, Role::test_net3})
      for (bool labels : {false, true}) {
        DatasetManifest m;
        m.entries.push_back(entry(r, labels));
        if (!labels && role_requires_labels(r)) {
          try {
            m.validate();
            FAIL("expected ConfigError");
          } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("labeled role missing labels") != std::string::npos);
          }
        } else {
          CHECK_NOTHROW(m.validate());
        }
      }
    CHECK_FALSE(role_requires_labels(Role::style_only));
    CHECK(role_requires_labels(Role::train_gan));

    DatasetManifest single;
    single.entries.push_back(entry(Role::train_net1, true));
    const auto back = manifest_from_json(to_json(single));
    CHECK(back.entries.size() == 1);
    CHECK(back.entries == single.entries);

    auto j = to_json(single);
    j["entries"][0]["role"] = "train_net2";
    CHECK_THROWS_AS(manifest_from_json(j), ConfigError);
    j = to_json(single);
    j["entries"][0].erase("labelmap_path");
    j["entries"][0]["role"] = "train_gan";
    CHECK_THROWS_AS(manifest_from_json(j), ConfigError);
  }

  TEST_CASE("dataset overview manifest has five groups") {
    const auto dir = tmp_dir("core_manifest");
    DatasetManifest m;
    m.entries = {entry(Role::train_net1, true, "XCAT"), entry(Role::train_gan, true, "ACDC"),
                 entry(Role::test_net3, true, "ACDC"),  entry(Role::style_only, false, "SCD"),
                 entry(Role::style_only, false, "York"), entry(Role::train_net3, true, "cCMR"),
                 entry(Role::test_net3, true, "cCMR")};
    m.entries[0].scheme = SchemeKind::EightClass;
    save_manifest(m, (dir / "m.json").string());
    const auto loaded = load_manifest((dir / "m.json").string());
    CHECK(loaded.entries == m.entries);
    CHECK(loaded.groups().size() == 5);
    CHECK(loaded.with_role(Role::style_only).size() == 2);
    CHECK(fs::path(loaded.resolve("a.nii.gz")) == dir / "a.nii.gz");
    CHECK(loaded.resolve("/abs/a.nii.gz") == "/abs/a.nii.gz");

    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK_THROWS_AS(load_manifest((dir / "bad.json").string()), ConfigError);
    CHECK_THROWS_AS(load_manifest((dir / "missing.json").string()), ConfigError);
  }

  TEST_CASE("segmentation and gan config defaults") {
    const auto n1 = SegTrainConfig::defaults(NetworkKind::net1);
    CHECK(n1.batch_size == 10);
    CHECK(n1.max_epochs == 200);
    CHECK(n1.initial_lr == 1e-4);
    CHECK(n1.weight_decay == 5e-5);
    CHECK(n1.dropout_rate == 0.5);
    CHECK(n1.norm_kind == NormKind::batch);
    const auto n3 = SegTrainConfig::defaults(NetworkKind::net3);
    CHECK(n3.batch_size == 32);
    CHECK(n3.max_epochs == 500);
    CHECK(n3.initial_lr == 5e-4);
    CHECK(n3.weight_decay == 5e-5);
    CHECK(n3.dropout_rate == 0.2);
    CHECK(n3.norm_kind == NormKind::instance);
    CHECK(n3.lr_plateau_factor == 0.2);
    CHECK(n3.plateau_window_epochs == 30);
    CHECK(n3.min_lr == 1e-6);
    CHECK(n3.ema_decay == 0.9);
    CHECK(n1.input_size == 256);
    CHECK(n3.unet_spec().out_channels == 4);
    CHECK(n1.unet_spec().out_channels == 8);

    const auto g = GanTrainConfig::defaults();
    CHECK(g.lr == 2e-4);
    CHECK(g.batch_size == 20);
    CHECK(g.kl_weight == 0.5);

    for (const auto& c : {n1, n3, SegTrainConfig::defaults(NetworkKind::net3, Profile::desk)}) {
      CHECK(seg_config_from_json(to_json(c)) == c);
    }
    CHECK(gan_config_from_json(to_json(g)) == g);
    auto j = to_json(n1);
    j["learning_rate"] = 0.1;
    CHECK_THROWS_AS(seg_config_from_json(j), ConfigError);
    j = to_json(n1);
    j["batch_size"] = 0;
    CHECK_THROWS_AS(seg_config_from_json(j), ConfigError);
    auto k = to_json(g);
    k["kl_weight"] = -1.0;
    CHECK_THROWS_AS(gan_config_from_json(k), ConfigError);
  }

  TEST_CASE("checkpoint round trip and corruption") {
    const auto dir = tmp_dir("core_ckpt");
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::uint8_t> blob(rng.below(4096));
      for (auto& b : blob) b = static_cast<std::uint8_t>(rng.next_u64());
      const auto c = Checkpoint::make("net1", blob, Json{{"trial", trial}}, 200, Json::array({{{"epoch", 1}}}));
      const auto path = (dir / ("c" + std::to_string(trial) + ".ckpt")).string();
      save_checkpoint(c, path);
      const auto back = load_checkpoint(path);
      CHECK(back == c);
      CHECK(back.epoch == 200);
      CHECK(back.digest == sha256_hex(blob));
      CHECK(back.config() == Json{{"trial", trial}});
    }
    const auto c = Checkpoint::make("net1", {1, 2, 3, 4, 5}, Json::object(), 200);
    const auto bytes = serialize_checkpoint(c);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 7);
    write_bytes(dir / "t.ckpt", truncated);
    CHECK_THROWS_AS(load_checkpoint((dir / "t.ckpt").string()), DigestMismatch);
    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x40;
    CHECK_THROWS_AS(deserialize_checkpoint(flipped), DigestMismatch);

    auto versioned = bytes;
    versioned.resize(bytes.size() - 32);
    versioned[4] = 9;
    const auto d = sha256(std::span<const std::uint8_t>(versioned));
    versioned.insert(versioned.end(), d.begin(), d.end());
    CHECK_THROWS_AS(deserialize_checkpoint(versioned), FormatError);
    CHECK_THROWS_AS(load_checkpoint((dir / "none.ckpt").string()), ConfigError);
  }

  TEST_CASE("nifti round trip") {
    const auto dir = tmp_dir("core_nifti");
    Volume v;
    v.voxels = Grid3<double>(Shape3{3, 5, 7});
    Rng rng(4);
    for (auto& x : v.voxels.values()) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    v.spacing = Spacing(1.3, 1.25, 8.0);
    v.phase = Phase::ES;
    v.subject_id = "subj7";
    v.normalized = true;
    for (const char* name : {"v.nii", "v.nii.gz"}) {
      nifti::write_volume(v, (dir / name).string());
      const auto back = nifti::read_volume((dir / name).string());
      CHECK(back.voxels == v.voxels);
      CHECK(same_spacing(back.spacing, v.spacing));
      CHECK(back.phase == Phase::ES);
      CHECK(back.subject_id == "subj7");
    }
    LabelMap l;
    l.labels = Grid3<std::uint8_t>(Shape3{3, 5, 7});
    for (auto& x : l.labels.values()) x = static_cast<std::uint8_t>(rng.below(8));
    l.scheme = SchemeKind::EightClass;
    l.spacing = v.spacing;
    nifti::write_labels(l, (dir / "l.nii.gz").string());
    const auto lb = nifti::read_labels((dir / "l.nii.gz").string(), SchemeKind::EightClass);
    CHECK(lb.labels == l.labels);
    CHECK(same_spacing(lb.spacing, l.spacing));
    CHECK_THROWS_AS(nifti::read_labels((dir / "l.nii.gz").string(), SchemeKind::FourClass), FormatError);
    CHECK_THROWS_AS(nifti::read_labels((dir / "v.nii.gz").string(), SchemeKind::EightClass), FormatError);

    auto raw = read_bytes(dir / "v.nii");
    raw.resize(400);
    write_bytes(dir / "short.nii", raw);
    CHECK_THROWS_AS(nifti::read_volume((dir / "short.nii").string()), FormatError);
    CHECK_THROWS_AS(nifti::read_volume((dir / "absent.nii").string()), ConfigError);
  }

  TEST_CASE("rng and digests") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
      const auto x = a.next_u64();
      CHECK(x == b.next_u64());
      CHECK(x != c.next_u64());
    }
    std::set<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 1000; ++i) seeds.insert(derive_seed(7, i));
    CHECK(seeds.size() == 1000);
    CHECK(derive_seed(7, 1, 2) != derive_seed(7, 2, 1));
    CHECK(sha256_hex(std::string_view("abc")) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex(std::string_view("")) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  }
}
