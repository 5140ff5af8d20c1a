#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "bmi/facepipe/detector.hpp"

// Shared fixture plumbing for the test suites.

namespace bmi::testsupport {

inline std::string source_dir() {
#ifdef BMI_SOURCE_DIR
  return BMI_SOURCE_DIR;
#else
  return ".";
#endif
}

inline std::string detector_asset_path() {
  return source_dir() + "/assets/hog_frontal_v1.det";
}

// The pinned detector asset, loaded once per process.
inline const facepipe::HogFaceDetector& shared_detector() {
  static const facepipe::HogFaceDetector detector =
      facepipe::HogFaceDetector::from_file(detector_asset_path());
  return detector;
}

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = (std::filesystem::temp_directory_path() /
             ("bmi_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
              std::to_string(counter++)))
                .string();
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (std::filesystem::path(path_) / name).string();
  }

 private:
  std::string path_;
};

}  // namespace bmi::testsupport
