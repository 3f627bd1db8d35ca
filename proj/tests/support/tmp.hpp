#pragma once

#include <filesystem>
#include <string>

#ifndef FIDEX_TEST_TMP
#define FIDEX_TEST_TMP "tmp"
#endif

namespace testing_tmp {

// Fresh per-name scratch directory under the test binary directory.
inline std::string dir(const std::string& name) {
  const auto p = std::filesystem::path(FIDEX_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace testing_tmp
