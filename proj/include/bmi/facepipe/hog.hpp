#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bmi/img/image.hpp"

namespace bmi::facepipe {

// Histogram-of-oriented-gradients descriptor over a square detection window:
// 8x8 pixel cells, 9 unsigned orientation bins, 2x2-cell blocks with L2-hys
// normalization, block stride of one cell.
struct HogSpec {
  int window = 64;
  int cell = 8;
  int bins = 9;
  int block = 2;
  float clip = 0.2f;

  int cells_per_side() const { return window / cell; }
  int blocks_per_side() const { return cells_per_side() - block + 1; }
  int descriptor_size() const {
    return blocks_per_side() * blocks_per_side() * block * block * bins;
  }
};

// Per-orientation integral images; cell histograms at arbitrary pixel
// offsets come out in O(1), which is what makes a sub-cell window stride
// affordable.
class GradientHistograms {
 public:
  GradientHistograms(const img::Image& image, int bins);

  int width() const { return w_; }
  int height() const { return h_; }

  // Sum of gradient magnitude for `bin` over [x, x+size) x [y, y+size).
  double cell_sum(int bin, int x, int y, int size) const;

 private:
  int w_, h_, bins_;
  std::vector<std::vector<double>> integral_;  // bins planes of (h+1)*(w+1)
};

// Descriptor for the window whose top-left pixel is (x, y).
Eigen::VectorXf hog_descriptor(const GradientHistograms& grads, const HogSpec& spec, int x,
                               int y);

}  // namespace bmi::facepipe
