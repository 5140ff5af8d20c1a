#include "bmi/facepipe/facepipe.hpp"

#include <algorithm>
#include <cmath>

namespace bmi::facepipe {

std::optional<FaceCrop> detect_face(const img::Image& image, const FaceDetector& detector,
                                    double margin, const std::string& sample_id) {
  const auto detection = detector.detect_best(image);
  if (!detection) {
    return std::nullopt;
  }
  const img::Box& d = detection->box;
  const int mx = static_cast<int>(std::lround(d.w * margin));
  const int my = static_cast<int>(std::lround(d.h * margin));
  img::Box expanded{d.x - mx, d.y - my, d.w + 2 * mx, d.h + 2 * my};
  // Clip to the source so the stored bbox always lies inside the image.
  const int x0 = std::clamp(expanded.x, 0, image.width - 1);
  const int y0 = std::clamp(expanded.y, 0, image.height - 1);
  const int x1 = std::clamp(expanded.x + expanded.w, x0 + 1, image.width);
  const int y1 = std::clamp(expanded.y + expanded.h, y0 + 1, image.height);
  const img::Box clipped{x0, y0, x1 - x0, y1 - y0};

  FaceCrop crop;
  crop.source_sample_id = sample_id;
  crop.pixels = img::crop(image, clipped);
  crop.bbox = clipped;
  crop.detector_score = detection->score;
  return crop;
}

nn::Tensor<float> preprocess(const img::Image& crop_pixels, int target_h, int target_w,
                             const NormSpec& norm) {
  if (crop_pixels.empty()) {
    throw std::invalid_argument("preprocess: degenerate crop");
  }
  if (target_h <= 0 || target_w <= 0) {
    throw std::invalid_argument("preprocess: bad target size");
  }
  const img::Image resized = img::resize_bilinear(crop_pixels, target_w, target_h);
  nn::Tensor<float> out(target_h, target_w, 3);
  const std::uint8_t* src = resized.rgb.data();
  float* dst = out.data.data();
  const float scale = static_cast<float>(norm.scale);
  const float m0 = static_cast<float>(norm.mean[0]), m1 = static_cast<float>(norm.mean[1]),
              m2 = static_cast<float>(norm.mean[2]);
  const float s0 = static_cast<float>(norm.stddev[0]), s1 = static_cast<float>(norm.stddev[1]),
              s2 = static_cast<float>(norm.stddev[2]);
  const std::size_t npix = static_cast<std::size_t>(target_h) * target_w;
  for (std::size_t i = 0; i < npix; ++i) {
    dst[i * 3 + 0] = (src[i * 3 + 0] * scale - m0) / s0;
    dst[i * 3 + 1] = (src[i * 3 + 1] * scale - m1) / s1;
    dst[i * 3 + 2] = (src[i * 3 + 2] * scale - m2) / s2;
  }
  return out;
}

EnrollmentResult enroll(const std::vector<dataset::FaceSample>& samples,
                        const FaceDetector& detector, double margin) {
  EnrollmentResult result;
  for (const auto& sample : samples) {
    img::Image image;
    try {
      image = img::load_image(sample.image_ref);
    } catch (const img::ImageError&) {
      result.io_error_ids.push_back(sample.sample_id);
      continue;
    }
    auto crop = detect_face(image, detector, margin, sample.sample_id);
    if (crop) {
      result.crops.push_back(std::move(*crop));
    } else {
      result.fte_ids.push_back(sample.sample_id);
    }
  }
  return result;
}

nlohmann::json fte_report(const EnrollmentResult& result) {
  return {{"fte", result.fte_ids}, {"io_errors", result.io_error_ids}};
}

}  // namespace bmi::facepipe
