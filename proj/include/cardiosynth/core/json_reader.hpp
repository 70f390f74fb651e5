#pragma once

#include <set>
#include <string>
#include <string_view>

#include "cardiosynth/core/config.hpp"
#include "cardiosynth/core/error.hpp"

namespace cardiosynth {

/// Reads keys from a JSON object, tracking which ones were consumed.
class JsonReader {
 public:
  JsonReader(const Json& j, std::string_view where) : j_(j), where_(where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string(where_) + "." + key + ": " + e.what());
    }
  }

  template <typename F>
  void get_with(const char* key, F&& f) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      f(*it);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string(where_) + "." + key + ": " + e.what());
    }
  }

  void ignore(const char* key) { seen_.insert(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) throw ConfigError(std::string(where_) + ": unknown key '" + it.key() + "'");
  }

 private:
  const Json& j_;
  std::string_view where_;
  std::set<std::string> seen_;
};

inline Interval interval_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("interval must be a 2-element array");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace cardiosynth
