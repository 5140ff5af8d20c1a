#include "bmi/img/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bmi/common/rng.hpp"

namespace bmi::img {

namespace {

struct Rgb {
  double r, g, b;
};

void blend(Image& im, int x, int y, const Rgb& c, double alpha) {
  if (x < 0 || y < 0 || x >= im.width || y >= im.height || alpha <= 0.0) return;
  std::uint8_t* p = im.px(x, y);
  const double a = std::min(alpha, 1.0);
  p[0] = static_cast<std::uint8_t>(std::lround(p[0] * (1 - a) + c.r * a));
  p[1] = static_cast<std::uint8_t>(std::lround(p[1] * (1 - a) + c.g * a));
  p[2] = static_cast<std::uint8_t>(std::lround(p[2] * (1 - a) + c.b * a));
}

// Soft-edged filled ellipse.
void fill_ellipse(Image& im, double cx, double cy, double rx, double ry, const Rgb& c) {
  const double edge = 1.5 / std::max(1.0, std::min(rx, ry));
  const int x0 = static_cast<int>(std::floor(cx - rx - 2));
  const int x1 = static_cast<int>(std::ceil(cx + rx + 2));
  const int y0 = static_cast<int>(std::floor(cy - ry - 2));
  const int y1 = static_cast<int>(std::ceil(cy + ry + 2));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = (x + 0.5 - cx) / rx;
      const double dy = (y + 0.5 - cy) / ry;
      const double d = dx * dx + dy * dy;
      blend(im, x, y, c, (1.0 - d) / edge);
    }
  }
}

void paint_background(Image& im, int bg_style, std::mt19937_64& gen) {
  const Rgb base{uniform(gen, 20, 70), uniform(gen, 20, 70), uniform(gen, 30, 90)};
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      double shade = 1.0;
      if (bg_style == 1) {
        shade = 0.6 + 0.8 * y / im.height;
      }
      std::uint8_t* p = im.px(x, y);
      p[0] = static_cast<std::uint8_t>(std::clamp(base.r * shade, 0.0, 255.0));
      p[1] = static_cast<std::uint8_t>(std::clamp(base.g * shade, 0.0, 255.0));
      p[2] = static_cast<std::uint8_t>(std::clamp(base.b * shade, 0.0, 255.0));
    }
  }
  if (bg_style == 2) {
    const int blobs = 3 + static_cast<int>(uniform_index(gen, 4));
    for (int i = 0; i < blobs; ++i) {
      const Rgb c{uniform(gen, 10, 120), uniform(gen, 10, 120), uniform(gen, 10, 120)};
      fill_ellipse(im, uniform(gen, 0, im.width), uniform(gen, 0, im.height),
                   uniform(gen, 6, im.width / 3.0), uniform(gen, 6, im.height / 3.0), c);
    }
  }
}

void add_noise(Image& im, std::mt19937_64& gen, double amp) {
  for (auto& v : im.rgb) {
    const double n = uniform(gen, -amp, amp);
    v = static_cast<std::uint8_t>(std::clamp(v + n, 0.0, 255.0));
  }
}

}  // namespace

Box portrait_face_box(const PortraitParams& p) {
  return Box{static_cast<int>(std::lround(p.face_cx - p.face_size / 2)),
             static_cast<int>(std::lround(p.face_cy - p.face_size / 2)),
             static_cast<int>(std::lround(p.face_size)),
             static_cast<int>(std::lround(p.face_size))};
}

Image render_portrait(const PortraitParams& p) {
  std::mt19937_64 gen(p.seed);
  Image im(p.canvas_w, p.canvas_h);
  paint_background(im, p.bg_style, gen);

  const double s = p.face_size;
  const double cx = p.face_cx;
  const double cy = p.face_cy;
  const double k = std::clamp(p.brightness, 0.05, 1.0);

  const Rgb skin{242 * k, 205 * k, 178 * k};
  const Rgb dark{40 * k, 28 * k, 24 * k};
  const Rgb shadow{180 * k, 140 * k, 120 * k};

  // Head oval fills the face box vertically.
  fill_ellipse(im, cx, cy, 0.40 * s, 0.50 * s, skin);
  // Brow line and nose shading add interior gradients.
  fill_ellipse(im, cx, cy - 0.18 * s, 0.30 * s, 0.045 * s, shadow);
  fill_ellipse(im, cx, cy + 0.08 * s, 0.045 * s, 0.14 * s, shadow);
  // Eyes.
  fill_ellipse(im, cx - 0.17 * s, cy - 0.10 * s, 0.075 * s, 0.05 * s, dark);
  fill_ellipse(im, cx + 0.17 * s, cy - 0.10 * s, 0.075 * s, 0.05 * s, dark);
  // Mouth.
  fill_ellipse(im, cx, cy + 0.28 * s, 0.15 * s, 0.045 * s, dark);

  add_noise(im, gen, 5.0);
  return im;
}

Image render_background(int w, int h, int bg_style, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Image im(w, h);
  paint_background(im, bg_style, gen);
  add_noise(im, gen, 5.0);
  return im;
}

Image render_blank(int w, int h, std::uint8_t value) {
  Image im(w, h);
  std::fill(im.rgb.begin(), im.rgb.end(), value);
  return im;
}

std::string write_synthetic_dataset(const std::string& dir,
                                    const SynthDatasetOptions& o) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::mt19937_64 gen(o.seed);

  const std::string manifest_path = (fs::path(dir) / "manifest.csv").string();
  std::ofstream manifest(manifest_path, std::ios::trunc);
  if (!manifest) {
    throw std::runtime_error("synth: cannot write " + manifest_path);
  }
  manifest << "sample_id,image_ref,gender,bmi,dataset_tag\n";

  char name[32];
  for (int i = 0; i < o.count; ++i) {
    const double t = o.count > 1 ? static_cast<double>(i) / (o.count - 1) : 0.5;
    const double bmi = o.bmi_lo + (o.bmi_hi - o.bmi_lo) * t;
    PortraitParams p;
    p.canvas_w = p.canvas_h = o.canvas;
    p.face_size = o.canvas * uniform(gen, 0.55, 0.66);
    p.face_cx = o.canvas / 2.0 + uniform(gen, -6, 6);
    p.face_cy = o.canvas / 2.0 + uniform(gen, -6, 6);
    p.brightness = 0.30 + 0.62 * t;
    p.bg_style = static_cast<int>(uniform_index(gen, 3));
    p.seed = gen();
    std::snprintf(name, sizeof(name), "syn%04d", i);
    const std::string file = (fs::path(dir) / (std::string(name) + ".ppm")).string();
    save_ppm(file, render_portrait(p));
    manifest << name << "," << file << "," << (i % 2 == 0 ? "male" : "female") << ","
             << bmi << "," << o.dataset_tag << "\n";
  }
  for (int i = 0; i < o.blank_count; ++i) {
    std::snprintf(name, sizeof(name), "blank%03d", i);
    const std::string file = (fs::path(dir) / (std::string(name) + ".ppm")).string();
    save_ppm(file, render_blank(o.canvas, o.canvas));
    manifest << name << "," << file << "," << (i % 2 == 0 ? "male" : "female") << ",25.0,"
             << o.dataset_tag << "\n";
  }
  return manifest_path;
}

}  // namespace bmi::img
