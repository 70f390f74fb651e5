#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cardiosynth/core/config.hpp"
#include "cardiosynth/core/types.hpp"

namespace cardiosynth {

enum class Role { train_net1, train_gan, style_only, train_net3, test_net3 };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);
/// Every role except style_only needs a label map.
bool role_requires_labels(Role r);

struct ManifestEntry {
  std::string volume_path;
  std::optional<std::string> labelmap_path;
  SchemeKind scheme = SchemeKind::FourClass;
  Role role = Role::train_net3;
  std::string source_tag;
  /// Free-form provenance (label source, style source, ...).
  Json provenance = Json::object();

  bool operator==(const ManifestEntry&) const = default;
};

/// List of volumes with their roles. Relative paths resolve against `base_dir`.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::string base_dir;

  /// Throws ConfigError("labeled role missing labels") and friends.
  void validate() const;
  std::string resolve(const std::string& path) const;
  std::vector<ManifestEntry> with_role(Role r) const;
  std::map<std::string, std::vector<ManifestEntry>> groups() const;
};

Json to_json(const ManifestEntry& e);
Json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const Json& j, std::string base_dir = {});
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

}  // namespace cardiosynth
