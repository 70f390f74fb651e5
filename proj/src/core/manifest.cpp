#include "cardiosynth/core/manifest.hpp"

#include <filesystem>

namespace cardiosynth {

namespace fs = std::filesystem;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::train_net1: return "train_net1";
    case Role::train_gan: return "train_gan";
    case Role::style_only: return "style_only";
    case Role::train_net3: return "train_net3";
    case Role::test_net3: return "test_net3";
  }
  return "?";
}

Role role_from_string(std::string_view s) {
  for (Role r : {Role::train_net1, Role::train_gan, Role::style_only, Role::train_net3, Role::test_net3})
    if (to_string(r) == s) return r;
  throw ConfigError("unknown role '" + std::string(s) + "'");
}

bool role_requires_labels(Role r) { return r != Role::style_only; }

void DatasetManifest::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.volume_path.empty()) throw ConfigError("manifest entry " + std::to_string(i) + ": empty volume_path");
    if (role_requires_labels(e.role) && !e.labelmap_path)
      throw ConfigError("manifest entry " + std::to_string(i) + ": labeled role missing labels (role " +
                        std::string(to_string(e.role)) + ")");
  }
}

std::string DatasetManifest::resolve(const std::string& path) const {
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p.string();
  return (fs::path(base_dir) / p).string();
}

std::vector<ManifestEntry> DatasetManifest::with_role(Role r) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.role == r) out.push_back(e);
  return out;
}

std::map<std::string, std::vector<ManifestEntry>> DatasetManifest::groups() const {
  std::map<std::string, std::vector<ManifestEntry>> g;
  for (const auto& e : entries) g[e.source_tag].push_back(e);
  return g;
}

Json to_json(const ManifestEntry& e) {
  Json j{{"volume_path", e.volume_path},
         {"scheme", std::string(to_string(e.scheme))},
         {"role", std::string(to_string(e.role))},
         {"source_tag", e.source_tag}};
  if (e.labelmap_path) j["labelmap_path"] = *e.labelmap_path;
  if (!e.provenance.empty()) j["provenance"] = e.provenance;
  return j;
}

Json to_json(const DatasetManifest& m) {
  Json entries = Json::array();
  for (const auto& e : m.entries) entries.push_back(to_json(e));
  return Json{{"schema_version", kSchemaVersion}, {"entries", entries}};
}

DatasetManifest manifest_from_json(const Json& j, std::string base_dir) {
  if (!j.is_object()) throw ConfigError("manifest must be a JSON object");
  if (j.value("schema_version", kSchemaVersion) != kSchemaVersion)
    throw ConfigError("unsupported manifest schema_version");
  if (!j.contains("entries") || !j["entries"].is_array()) throw ConfigError("manifest requires an 'entries' array");
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  try {
    for (const auto& je : j["entries"]) {
      ManifestEntry e;
      e.volume_path = je.at("volume_path").get<std::string>();
      if (je.contains("labelmap_path") && !je["labelmap_path"].is_null())
        e.labelmap_path = je["labelmap_path"].get<std::string>();
      e.scheme = scheme_from_string(je.value("scheme", std::string("FourClass")));
      e.role = role_from_string(je.at("role").get<std::string>());
      e.source_tag = je.value("source_tag", std::string());
      if (je.contains("provenance")) e.provenance = je["provenance"];
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("manifest parse failure: ") + ex.what());
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::string& path) {
  return manifest_from_json(read_json_file(path), fs::path(path).parent_path().string());
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  m.validate();
  write_json_file(path, to_json(m));
}

}  // namespace cardiosynth
