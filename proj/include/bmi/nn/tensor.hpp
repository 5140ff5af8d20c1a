#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace bmi::nn {

template <typename S>
using Vec = Eigen::Vector<S, Eigen::Dynamic>;
template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense rank-3 activation tensor, shape (h, w, c), interleaved channels:
// element (y, x, ch) lives at (y*w + x)*c + ch. The flat buffer viewed as an
// (h*w, c) row-major matrix is the natural operand for im2col GEMMs and
// per-channel affine ops.
template <typename S>
struct Tensor {
  int h = 0;
  int w = 0;
  int c = 0;
  Vec<S> data;

  Tensor() = default;
  Tensor(int h_, int w_, int c_) : h(h_), w(w_), c(c_) {
    data = Vec<S>::Zero(static_cast<Eigen::Index>(h_) * w_ * c_);
  }

  Eigen::Index size() const { return data.size(); }
  Eigen::Index pixels() const { return static_cast<Eigen::Index>(h) * w; }

  S& at(int y, int x, int ch) { return data[(static_cast<Eigen::Index>(y) * w + x) * c + ch]; }
  S at(int y, int x, int ch) const {
    return data[(static_cast<Eigen::Index>(y) * w + x) * c + ch];
  }

  auto as_pixel_matrix() { return Eigen::Map<RowMat<S>>(data.data(), pixels(), c); }
  auto as_pixel_matrix() const {
    return Eigen::Map<const RowMat<S>>(data.data(), pixels(), c);
  }

  bool same_shape(const Tensor& other) const {
    return h == other.h && w == other.w && c == other.c;
  }

  std::string shape_str() const {
    return "(" + std::to_string(h) + ", " + std::to_string(w) + ", " + std::to_string(c) + ")";
  }
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace bmi::nn
