#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "bmi/nn/tensor.hpp"

// Inference kernels as free functions over Tensor<S>. Parameter structs are
// plain aggregates so backbone graphs can own and enumerate them.

namespace bmi::nn {

template <typename S>
struct Conv2dParams {
  int kh = 3, kw = 3;
  int in_ch = 0, out_ch = 0;
  int stride = 1, pad = 0;
  Mat<S> kernel;  // (kh*kw*in_ch) x out_ch; row index = (ky*kw + kx)*in_ch + ci
  Vec<S> bias;    // out_ch, may be empty

  Eigen::Index weight_count() const { return kernel.size() + bias.size(); }
};

template <typename S>
struct DepthwiseConv2dParams {
  int kh = 3, kw = 3;
  int channels = 0;
  int stride = 1, pad = 0;
  Mat<S> kernel;  // (kh*kw) x channels
  Vec<S> bias;    // channels, may be empty
};

template <typename S>
struct BatchNormParams {
  Vec<S> gamma, beta, mean, var;
  S eps = static_cast<S>(1e-5);
};

template <typename S>
struct DenseParams {
  Mat<S> weight;  // in x out
  Vec<S> bias;    // out, may be empty
};

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// im2col: one row per output pixel, columns grouped as (ky, kx, ci). The
// interleaved layout makes each (ky, kx) tap a contiguous in_ch block.
template <typename S>
void im2col(const Tensor<S>& x, int kh, int kw, int stride, int pad, RowMat<S>& cols) {
  const int oh = conv_out_extent(x.h, kh, stride, pad);
  const int ow = conv_out_extent(x.w, kw, stride, pad);
  cols.setZero(static_cast<Eigen::Index>(oh) * ow, static_cast<Eigen::Index>(kh) * kw * x.c);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index row = static_cast<Eigen::Index>(oy) * ow + ox;
      S* dst = cols.data() + row * cols.cols();
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride - pad + ky;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w) {
            const S* src = x.data.data() + (static_cast<Eigen::Index>(iy) * x.w + ix) * x.c;
            std::copy_n(src, x.c, dst + (static_cast<Eigen::Index>(ky) * kw + kx) * x.c);
          }
        }
      }
    }
  }
}

// Scatter-add transpose of im2col; used by conv backward.
template <typename S>
void col2im(const RowMat<S>& cols, int kh, int kw, int stride, int pad, Tensor<S>& x) {
  const int oh = conv_out_extent(x.h, kh, stride, pad);
  const int ow = conv_out_extent(x.w, kw, stride, pad);
  x.data.setZero();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index row = static_cast<Eigen::Index>(oy) * ow + ox;
      const S* src = cols.data() + row * cols.cols();
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride - pad + ky;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w) {
            S* dst = x.data.data() + (static_cast<Eigen::Index>(iy) * x.w + ix) * x.c;
            const S* s = src + (static_cast<Eigen::Index>(ky) * kw + kx) * x.c;
            for (int ci = 0; ci < x.c; ++ci) dst[ci] += s[ci];
          }
        }
      }
    }
  }
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Conv2dParams<S>& p) {
  require(x.c == p.in_ch, "conv2d: channel mismatch, input " + x.shape_str());
  const int oh = conv_out_extent(x.h, p.kh, p.stride, p.pad);
  const int ow = conv_out_extent(x.w, p.kw, p.stride, p.pad);
  require(oh > 0 && ow > 0, "conv2d: output collapsed for input " + x.shape_str());
  RowMat<S> cols;
  im2col(x, p.kh, p.kw, p.stride, p.pad, cols);
  Tensor<S> y(oh, ow, p.out_ch);
  y.as_pixel_matrix().noalias() = cols * p.kernel;
  if (p.bias.size() > 0) {
    y.as_pixel_matrix().rowwise() += p.bias.transpose();
  }
  return y;
}

template <typename S>
Tensor<S> depthwise_conv2d(const Tensor<S>& x, const DepthwiseConv2dParams<S>& p) {
  require(x.c == p.channels, "depthwise_conv2d: channel mismatch");
  const int oh = conv_out_extent(x.h, p.kh, p.stride, p.pad);
  const int ow = conv_out_extent(x.w, p.kw, p.stride, p.pad);
  Tensor<S> y(oh, ow, x.c);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      S* out = y.data.data() + (static_cast<Eigen::Index>(oy) * ow + ox) * x.c;
      for (int ky = 0; ky < p.kh; ++ky) {
        const int iy = oy * p.stride - p.pad + ky;
        if (iy < 0 || iy >= x.h) continue;
        for (int kx = 0; kx < p.kw; ++kx) {
          const int ix = ox * p.stride - p.pad + kx;
          if (ix < 0 || ix >= x.w) continue;
          const S* in = x.data.data() + (static_cast<Eigen::Index>(iy) * x.w + ix) * x.c;
          const Eigen::Index tap = static_cast<Eigen::Index>(ky) * p.kw + kx;
          for (int ci = 0; ci < x.c; ++ci) {
            out[ci] += in[ci] * p.kernel(tap, ci);
          }
        }
      }
      if (p.bias.size() > 0) {
        for (int ci = 0; ci < x.c; ++ci) out[ci] += p.bias[ci];
      }
    }
  }
  return y;
}

template <typename S>
Tensor<S> batchnorm(const Tensor<S>& x, const BatchNormParams<S>& p) {
  require(x.c == p.gamma.size(), "batchnorm: channel mismatch");
  Tensor<S> y(x.h, x.w, x.c);
  const Vec<S> scale = p.gamma.array() / (p.var.array() + p.eps).sqrt();
  const Vec<S> shift = p.beta.array() - p.mean.array() * scale.array();
  auto xm = x.as_pixel_matrix();
  auto ym = y.as_pixel_matrix();
  for (int ch = 0; ch < x.c; ++ch) {
    ym.col(ch).array() = xm.col(ch).array() * scale[ch] + shift[ch];
  }
  return y;
}

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  Tensor<S> y(x.h, x.w, x.c);
  y.data = x.data.cwiseMax(S(0));
  return y;
}

template <typename S>
Tensor<S> relu6(const Tensor<S>& x) {
  Tensor<S> y(x.h, x.w, x.c);
  y.data = x.data.cwiseMax(S(0)).cwiseMin(S(6));
  return y;
}

// Max-Feature-Map across the channel split: with 2k input channels,
// out[..., c] = max(x[..., c], x[..., c + k]). Keeps the winning half of
// every channel pair and halves the depth.
template <typename S>
Tensor<S> mfm(const Tensor<S>& x) {
  require(x.c % 2 == 0, "mfm: channel count must be even, got " + x.shape_str());
  const int half = x.c / 2;
  Tensor<S> y(x.h, x.w, half);
  const Eigen::Index npix = x.pixels();
  for (Eigen::Index i = 0; i < npix; ++i) {
    const S* in = x.data.data() + i * x.c;
    S* out = y.data.data() + i * half;
    for (int ch = 0; ch < half; ++ch) {
      out[ch] = std::max(in[ch], in[ch + half]);
    }
  }
  return y;
}

template <typename S>
Tensor<S> maxpool2d(const Tensor<S>& x, int k, int stride, int pad = 0) {
  const int oh = conv_out_extent(x.h, k, stride, pad);
  const int ow = conv_out_extent(x.w, k, stride, pad);
  Tensor<S> y(oh, ow, x.c);
  y.data.setConstant(std::numeric_limits<S>::lowest());
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      S* out = y.data.data() + (static_cast<Eigen::Index>(oy) * ow + ox) * x.c;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= x.h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= x.w) continue;
          const S* in = x.data.data() + (static_cast<Eigen::Index>(iy) * x.w + ix) * x.c;
          for (int ci = 0; ci < x.c; ++ci) out[ci] = std::max(out[ci], in[ci]);
        }
      }
    }
  }
  return y;
}

template <typename S>
Tensor<S> avgpool2d(const Tensor<S>& x, int k, int stride) {
  const int oh = conv_out_extent(x.h, k, stride, 0);
  const int ow = conv_out_extent(x.w, k, stride, 0);
  Tensor<S> y(oh, ow, x.c);
  const S inv = S(1) / static_cast<S>(k * k);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      S* out = y.data.data() + (static_cast<Eigen::Index>(oy) * ow + ox) * x.c;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const S* in =
              x.data.data() +
              (static_cast<Eigen::Index>(oy * stride + ky) * x.w + ox * stride + kx) * x.c;
          for (int ci = 0; ci < x.c; ++ci) out[ci] += in[ci];
        }
      }
      for (int ci = 0; ci < x.c; ++ci) out[ci] *= inv;
    }
  }
  return y;
}

template <typename S>
Vec<S> global_avgpool(const Tensor<S>& x) {
  return x.as_pixel_matrix().colwise().mean().transpose();
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  require(a.same_shape(b), "add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor<S> y(a.h, a.w, a.c);
  y.data = a.data + b.data;
  return y;
}

template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  require(a.h == b.h && a.w == b.w, "concat: spatial mismatch");
  Tensor<S> y(a.h, a.w, a.c + b.c);
  const Eigen::Index npix = a.pixels();
  for (Eigen::Index i = 0; i < npix; ++i) {
    std::copy_n(a.data.data() + i * a.c, a.c, y.data.data() + i * y.c);
    std::copy_n(b.data.data() + i * b.c, b.c, y.data.data() + i * y.c + a.c);
  }
  return y;
}

template <typename S>
Vec<S> flatten(const Tensor<S>& x) {
  return x.data;
}

template <typename S>
Vec<S> dense(const Vec<S>& x, const DenseParams<S>& p) {
  require(x.size() == p.weight.rows(), "dense: input size mismatch");
  Vec<S> y = p.weight.transpose() * x;
  if (p.bias.size() > 0) y += p.bias;
  return y;
}

// MFM applied to a flat feature vector (pairs across the half split).
template <typename S>
Vec<S> mfm_vec(const Vec<S>& x) {
  require(x.size() % 2 == 0, "mfm_vec: even length required");
  const Eigen::Index half = x.size() / 2;
  return x.head(half).cwiseMax(x.tail(half));
}

}  // namespace bmi::nn
