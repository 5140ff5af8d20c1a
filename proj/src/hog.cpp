#include "bmi/facepipe/hog.hpp"

#include <cmath>

namespace bmi::facepipe {

GradientHistograms::GradientHistograms(const img::Image& image, int bins)
    : w_(image.width), h_(image.height), bins_(bins) {
  const std::vector<float> gray = bmi::img::to_gray(image);
  auto g = [&](int x, int y) -> float {
    x = std::clamp(x, 0, w_ - 1);
    y = std::clamp(y, 0, h_ - 1);
    return gray[static_cast<std::size_t>(y) * w_ + x];
  };

  const std::size_t plane = static_cast<std::size_t>(w_ + 1) * (h_ + 1);
  integral_.assign(bins_, std::vector<double>(plane, 0.0));

  // Row-wise build of the summed-area tables, one per orientation bin.
  std::vector<double> row_acc(bins_, 0.0);
  for (int y = 0; y < h_; ++y) {
    std::fill(row_acc.begin(), row_acc.end(), 0.0);
    for (int x = 0; x < w_; ++x) {
      const float gx = g(x + 1, y) - g(x - 1, y);
      const float gy = g(x, y + 1) - g(x, y - 1);
      const double mag = std::sqrt(static_cast<double>(gx) * gx + static_cast<double>(gy) * gy);
      double theta = std::atan2(static_cast<double>(gy), static_cast<double>(gx));
      if (theta < 0) theta += M_PI;  // unsigned orientation in [0, pi)
      int bin = static_cast<int>(theta / M_PI * bins_);
      if (bin >= bins_) bin = bins_ - 1;
      row_acc[bin] += mag;
      const std::size_t base = static_cast<std::size_t>(y + 1) * (w_ + 1) + (x + 1);
      for (int b = 0; b < bins_; ++b) {
        integral_[b][base] = integral_[b][base - (w_ + 1)] + row_acc[b];
      }
    }
  }
}

double GradientHistograms::cell_sum(int bin, int x, int y, int size) const {
  const auto& plane = integral_[bin];
  const int x1 = x + size;
  const int y1 = y + size;
  const std::size_t stride = static_cast<std::size_t>(w_ + 1);
  return plane[static_cast<std::size_t>(y1) * stride + x1] -
         plane[static_cast<std::size_t>(y) * stride + x1] -
         plane[static_cast<std::size_t>(y1) * stride + x] +
         plane[static_cast<std::size_t>(y) * stride + x];
}

Eigen::VectorXf hog_descriptor(const GradientHistograms& grads, const HogSpec& spec, int x,
                               int y) {
  const int cps = spec.cells_per_side();
  const int bps = spec.blocks_per_side();

  // Cell histograms for this window.
  Eigen::MatrixXd cells(spec.bins, cps * cps);
  for (int cy = 0; cy < cps; ++cy) {
    for (int cx = 0; cx < cps; ++cx) {
      for (int b = 0; b < spec.bins; ++b) {
        cells(b, cy * cps + cx) =
            grads.cell_sum(b, x + cx * spec.cell, y + cy * spec.cell, spec.cell);
      }
    }
  }

  Eigen::VectorXf out(spec.descriptor_size());
  const int block_len = spec.block * spec.block * spec.bins;
  Eigen::VectorXd block(block_len);
  int offset = 0;
  for (int by = 0; by < bps; ++by) {
    for (int bx = 0; bx < bps; ++bx) {
      int k = 0;
      for (int cy = 0; cy < spec.block; ++cy) {
        for (int cx = 0; cx < spec.block; ++cx) {
          block.segment(k, spec.bins) = cells.col((by + cy) * cps + (bx + cx));
          k += spec.bins;
        }
      }
      // L2-hys: normalize, clip, renormalize. Zero-gradient blocks stay zero.
      const double n1 = block.norm();
      if (n1 > 1e-9) {
        block /= n1;
        block = block.cwiseMin(static_cast<double>(spec.clip));
        const double n2 = block.norm();
        if (n2 > 1e-9) block /= n2;
      } else {
        block.setZero();
      }
      out.segment(offset, block_len) = block.cast<float>();
      offset += block_len;
    }
  }
  return out;
}

}  // namespace bmi::facepipe
