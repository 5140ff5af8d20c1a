#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bmi::img {

// Unreadable or undecodable image data. Kept distinct from "no face found"
// so enrollment can separate I/O failures from failure-to-enroll.
class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 8-bit RGB raster, interleaved row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // size width*height*3

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* px(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* px(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool empty() const { return width <= 0 || height <= 0; }
};

// Integer box in image coordinates.
struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

double iou(const Box& a, const Box& b);

// Decoders accept binary PPM (P6), ASCII PPM (P3) and binary PGM (P5,
// widened to RGB). Anything else raises ImageError.
Image decode_image(const std::string& bytes);
Image load_image(const std::string& path);
void save_ppm(const std::string& path, const Image& image);
std::string encode_ppm(const Image& image);

// Same-size inputs are returned as an exact copy; everything else is
// sampled bilinearly.
Image resize_bilinear(const Image& image, int out_w, int out_h);

// Crop clipped to the image bounds.
Image crop(const Image& image, const Box& box);

std::vector<float> to_gray(const Image& image);  // luma in [0,255]

}  // namespace bmi::img
