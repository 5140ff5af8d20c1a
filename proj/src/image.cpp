#include "bmi/img/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bmi::img {

namespace {

// Reads the next whitespace/comment-delimited token of a PNM header.
bool next_token(const std::string& s, std::size_t& pos, std::string& tok) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  tok = s.substr(start, pos - start);
  return !tok.empty();
}

int parse_int(const std::string& s, std::size_t& pos, const char* what) {
  std::string tok;
  if (!next_token(s, pos, tok)) {
    throw ImageError(std::string("pnm: missing ") + what);
  }
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw ImageError(std::string("pnm: bad ") + what + " '" + tok + "'");
  }
}

}  // namespace

double iou(const Box& a, const Box& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x + a.w, b.x + b.w);
  const int y1 = std::min(a.y + a.h, b.y + b.h);
  const double inter = std::max(0, x1 - x0) * static_cast<double>(std::max(0, y1 - y0));
  const double uni = static_cast<double>(a.w) * a.h + static_cast<double>(b.w) * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

Image decode_image(const std::string& bytes) {
  if (bytes.size() < 2) {
    throw ImageError("image: payload too short");
  }
  const std::string magic = bytes.substr(0, 2);
  std::size_t pos = 2;
  if (magic != "P6" && magic != "P3" && magic != "P5") {
    throw ImageError("image: unsupported format (want PPM P6/P3 or PGM P5)");
  }
  const int w = parse_int(bytes, pos, "width");
  const int h = parse_int(bytes, pos, "height");
  const int maxval = parse_int(bytes, pos, "maxval");
  if (w <= 0 || h <= 0 || w > 1 << 15 || h > 1 << 15) {
    throw ImageError("image: bad dimensions");
  }
  if (maxval != 255) {
    throw ImageError("image: only maxval 255 is supported");
  }

  Image out(w, h);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (magic == "P3") {
    for (std::size_t i = 0; i < n * 3; ++i) {
      int v = parse_int(bytes, pos, "pixel");
      if (v < 0 || v > 255) throw ImageError("image: pixel out of range");
      out.rgb[i] = static_cast<std::uint8_t>(v);
    }
    return out;
  }

  // P6/P5: exactly one whitespace byte after maxval, then raw samples.
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ImageError("image: malformed binary pnm header");
  }
  ++pos;
  const std::size_t need = magic == "P6" ? n * 3 : n;
  if (bytes.size() - pos < need) {
    throw ImageError("image: truncated pixel data");
  }
  if (magic == "P6") {
    std::copy_n(reinterpret_cast<const std::uint8_t*>(bytes.data()) + pos, need, out.rgb.data());
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto g = static_cast<std::uint8_t>(bytes[pos + i]);
      out.rgb[i * 3 + 0] = g;
      out.rgb[i * 3 + 1] = g;
      out.rgb[i * 3 + 2] = g;
    }
  }
  return out;
}

Image load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ImageError("image: cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_image(buf.str());
}

std::string encode_ppm(const Image& image) {
  std::ostringstream out;
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
  return out.str();
}

void save_ppm(const std::string& path, const Image& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ImageError("image: cannot write " + path);
  }
  const std::string bytes = encode_ppm(image);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Image resize_bilinear(const Image& image, int out_w, int out_h) {
  if (image.empty() || out_w <= 0 || out_h <= 0) {
    throw ImageError("resize: degenerate raster");
  }
  if (out_w == image.width && out_h == image.height) {
    return image;
  }
  Image out(out_w, out_h);
  const double sx = static_cast<double>(image.width) / out_w;
  const double sy = static_cast<double>(image.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      const std::uint8_t* p00 = image.px(x0, y0);
      const std::uint8_t* p10 = image.px(x1, y0);
      const std::uint8_t* p01 = image.px(x0, y1);
      const std::uint8_t* p11 = image.px(x1, y1);
      std::uint8_t* o = out.px(x, y);
      for (int c = 0; c < 3; ++c) {
        const double top = p00[c] + (p10[c] - p00[c]) * wx;
        const double bot = p01[c] + (p11[c] - p01[c]) * wx;
        o[c] = static_cast<std::uint8_t>(std::lround(std::clamp(top + (bot - top) * wy, 0.0, 255.0)));
      }
    }
  }
  return out;
}

Image crop(const Image& image, const Box& box) {
  const int x0 = std::clamp(box.x, 0, image.width);
  const int y0 = std::clamp(box.y, 0, image.height);
  const int x1 = std::clamp(box.x + box.w, 0, image.width);
  const int y1 = std::clamp(box.y + box.h, 0, image.height);
  if (x1 <= x0 || y1 <= y0) {
    throw ImageError("crop: empty region");
  }
  Image out(x1 - x0, y1 - y0);
  for (int y = y0; y < y1; ++y) {
    std::copy_n(image.px(x0, y), static_cast<std::size_t>(x1 - x0) * 3, out.px(0, y - y0));
  }
  return out;
}

std::vector<float> to_gray(const Image& image) {
  std::vector<float> gray(static_cast<std::size_t>(image.width) * image.height);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const std::uint8_t* p = image.rgb.data() + i * 3;
    gray[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
  }
  return gray;
}

}  // namespace bmi::img
