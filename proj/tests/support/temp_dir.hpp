#pragma once

#include <filesystem>
#include <string>
#include <unistd.h>

namespace testing {

/// A fresh path under the system temp directory, removed on destruction.
struct TempDir {
  explicit TempDir(const std::string& prefix = "stylo-test") {
    path = std::filesystem::temp_directory_path() /
           (prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path path;
  static inline int counter = 0;
};

}  // namespace testing
