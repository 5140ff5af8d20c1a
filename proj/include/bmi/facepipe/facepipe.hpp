#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmi/dataset/dataset.hpp"
#include "bmi/facepipe/detector.hpp"
#include "bmi/img/image.hpp"
#include "bmi/nn/tensor.hpp"

namespace bmi::facepipe {

// Pixel normalization applied after the resize: v = (raw*scale - mean)/std
// per channel. `unit` maps 8-bit pixels into [0, 1]; pretrained backbones
// declare their own mean/std on top of that.
struct NormSpec {
  double scale = 1.0 / 255.0;
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};

  static NormSpec unit() { return NormSpec{}; }
  static NormSpec imagenet() {
    return NormSpec{1.0 / 255.0, {0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};
  }
};

struct FaceCrop {
  std::string source_sample_id;
  img::Image pixels;     // margin-expanded crop at native resolution
  img::Box bbox;         // crop footprint in source-image coordinates
  double detector_score = 0.0;
};

struct EnrollmentResult {
  std::vector<FaceCrop> crops;
  std::vector<std::string> fte_ids;       // no face found
  std::vector<std::string> io_error_ids;  // unreadable/undecodable image
};

inline constexpr double kDefaultCropMargin = 0.10;

// Best frontal face as a margin-expanded crop, or nullopt when the detector
// finds nothing (failure to enroll). Unreadable rasters raise ImageError
// before any detection is attempted.
std::optional<FaceCrop> detect_face(const img::Image& image, const FaceDetector& detector,
                                    double margin = kDefaultCropMargin,
                                    const std::string& sample_id = "");

// Resize + normalize to the consuming backbone's input layout (h, w, 3).
nn::Tensor<float> preprocess(const img::Image& crop_pixels, int target_h, int target_w,
                             const NormSpec& norm);
inline nn::Tensor<float> preprocess(const FaceCrop& crop, int target_h, int target_w,
                                    const NormSpec& norm) {
  return preprocess(crop.pixels, target_h, target_w, norm);
}

// Runs detection over every sample, partitioning the input into crops,
// failure-to-enroll ids and I/O failures. |crops| + |fte| + |io| always
// equals the input size; order follows the input.
EnrollmentResult enroll(const std::vector<dataset::FaceSample>& samples,
                        const FaceDetector& detector, double margin = kDefaultCropMargin);

nlohmann::json fte_report(const EnrollmentResult& result);

}  // namespace bmi::facepipe
