#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

namespace test_support {

inline std::filesystem::path tmp_dir(const std::string& name) {
  const char* env = std::getenv("CARDIOSYNTH_TEST_TMP");
  auto p = std::filesystem::path(env ? env : std::filesystem::temp_directory_path().string()) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace test_support
