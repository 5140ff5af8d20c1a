#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmi/img/image.hpp"

namespace bmi::img {

// Procedural frontal portraits. They carry the gradient structure a
// HOG + linear classifier keys on (oval head boundary, eye and mouth blobs)
// while staying fully deterministic, so detector training data, detector
// fixtures and end-to-end datasets can all be produced on demand.
struct PortraitParams {
  int canvas_w = 160;
  int canvas_h = 160;
  double face_cx = 80.0;
  double face_cy = 80.0;
  double face_size = 96.0;   // side of the square face box
  double brightness = 0.70;  // skin intensity scale in (0, 1]
  int bg_style = 2;          // 0 plain, 1 gradient, 2 blobs
  std::uint64_t seed = 1;
};

Image render_portrait(const PortraitParams& params);
Box portrait_face_box(const PortraitParams& params);

// Face-free canvas with the same background statistics; negatives for
// detector training and "no face" fixtures.
Image render_background(int w, int h, int bg_style, std::uint64_t seed);
Image render_blank(int w, int h, std::uint8_t value = 0);

// A manifest-backed dataset of portraits whose BMI is linearly encoded in
// skin brightness, plus optional blank (undetectable) rows. Writes PPM
// files and a manifest CSV into `dir` and returns the manifest path.
struct SynthDatasetOptions {
  int count = 80;
  int blank_count = 0;
  std::uint64_t seed = 1;
  double bmi_lo = 18.0;
  double bmi_hi = 42.0;
  int canvas = 160;
  std::string dataset_tag = "synthetic";
};

std::string write_synthetic_dataset(const std::string& dir,
                                    const SynthDatasetOptions& options);

}  // namespace bmi::img
