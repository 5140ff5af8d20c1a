#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bmi/common/rng.hpp"
#include "bmi/nn/kernels.hpp"
#include "bmi/nn/tensor.hpp"

// Minimal trainable sequential network: exactly the layer set the end-to-end
// regression CNN needs, with hand-written backward passes. Inference-only
// backbones use the free kernels directly and never pay for caches.

namespace bmi::nn {

enum class Mode {
  train,         // batch statistics, running stats updated
  train_frozen,  // batch statistics, running stats untouched (finite differences)
  infer,         // running statistics
};

template <typename S>
using Batch = std::vector<Tensor<S>>;

// Flat view of one parameter blob and its gradient.
template <typename S>
struct ParamView {
  std::string name;
  S* value = nullptr;
  S* grad = nullptr;
  Eigen::Index size = 0;
  bool trainable = true;
};

struct LayerCounts {
  std::string name;
  long trainable = 0;
  long total = 0;  // includes batchnorm running statistics
};

template <typename S>
class TrainLayer {
 public:
  virtual ~TrainLayer() = default;
  virtual std::string kind() const = 0;
  const std::string& name() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  virtual std::array<int, 3> infer_shape(std::array<int, 3> in) = 0;
  virtual void init(std::uint64_t) {}
  virtual void forward(const Batch<S>& x, Batch<S>& y, Mode mode) = 0;
  // x/y are the cached activations of the matching forward call.
  virtual void backward(const Batch<S>& x, const Batch<S>& y, const Batch<S>& dy,
                        Batch<S>& dx) = 0;
  virtual void collect_params(std::vector<ParamView<S>>&) {}
  virtual LayerCounts counts() const { return {label_, 0, 0}; }

 private:
  std::string label_ = "?";
};

template <typename S>
class ConvLayer final : public TrainLayer<S> {
 public:
  ConvLayer(int kernel, int out_ch) : k_(kernel), out_ch_(out_ch) {}
  std::string kind() const override { return "conv"; }

  std::array<int, 3> infer_shape(std::array<int, 3> in) override {
    in_ch_ = in[2];
    pad_ = (k_ - 1) / 2;  // same padding, stride 1
    p_.kh = p_.kw = k_;
    p_.in_ch = in_ch_;
    p_.out_ch = out_ch_;
    p_.stride = 1;
    p_.pad = pad_;
    p_.kernel.setZero(static_cast<Eigen::Index>(k_) * k_ * in_ch_, out_ch_);
    p_.bias.setZero(out_ch_);
    grad_kernel_.setZero(p_.kernel.rows(), p_.kernel.cols());
    grad_bias_.setZero(out_ch_);
    return {in[0], in[1], out_ch_};
  }

  void init(std::uint64_t seed) override {
    std::mt19937_64 gen(seed);
    const double limit = std::sqrt(6.0 / (static_cast<double>(k_) * k_ * in_ch_));
    for (Eigen::Index i = 0; i < p_.kernel.size(); ++i) {
      p_.kernel.data()[i] = static_cast<S>(uniform(gen, -limit, limit));
    }
    p_.bias.setZero();
  }

  void forward(const Batch<S>& x, Batch<S>& y, Mode) override {
    y.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = conv2d(x[i], p_);
  }

  void backward(const Batch<S>& x, const Batch<S>&, const Batch<S>& dy,
                Batch<S>& dx) override {
    grad_kernel_.setZero();
    grad_bias_.setZero();
    dx.resize(x.size());
    RowMat<S> cols;
    for (std::size_t i = 0; i < x.size(); ++i) {
      im2col(x[i], k_, k_, 1, pad_, cols);
      auto dy_mat = dy[i].as_pixel_matrix();
      grad_kernel_.noalias() += cols.transpose() * dy_mat;
      grad_bias_ += dy_mat.colwise().sum().transpose();
      RowMat<S> dcols = dy_mat * p_.kernel.transpose();
      dx[i] = Tensor<S>(x[i].h, x[i].w, x[i].c);
      col2im(dcols, k_, k_, 1, pad_, dx[i]);
    }
  }

  void collect_params(std::vector<ParamView<S>>& out) override {
    out.push_back({this->name() + ".kernel", p_.kernel.data(), grad_kernel_.data(),
                   p_.kernel.size(), true});
    out.push_back(
        {this->name() + ".bias", p_.bias.data(), grad_bias_.data(), p_.bias.size(), true});
  }

  LayerCounts counts() const override {
    const long n = static_cast<long>(p_.kernel.size() + p_.bias.size());
    return {this->name(), n, n};
  }

 private:
  int k_, out_ch_, in_ch_ = 0, pad_ = 0;
  Conv2dParams<S> p_;
  Mat<S> grad_kernel_;
  Vec<S> grad_bias_;
};

template <typename S>
class BatchNormLayer final : public TrainLayer<S> {
 public:
  std::string kind() const override { return "batchnorm"; }

  std::array<int, 3> infer_shape(std::array<int, 3> in) override {
    c_ = in[2];
    gamma_ = Vec<S>::Ones(c_);
    beta_ = Vec<S>::Zero(c_);
    running_mean_ = Vec<S>::Zero(c_);
    running_var_ = Vec<S>::Ones(c_);
    grad_gamma_ = Vec<S>::Zero(c_);
    grad_beta_ = Vec<S>::Zero(c_);
    return in;
  }

  void forward(const Batch<S>& x, Batch<S>& y, Mode mode) override {
    y.resize(x.size());
    if (mode == Mode::infer) {
      BatchNormParams<S> p{gamma_, beta_, running_mean_, running_var_, eps_};
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = batchnorm(x[i], p);
      return;
    }
    // Batch statistics over every pixel of every sample, per channel.
    const Eigen::Index n = x[0].pixels() * static_cast<Eigen::Index>(x.size());
    batch_mean_.setZero(c_);
    for (const auto& t : x) batch_mean_ += t.as_pixel_matrix().colwise().sum().transpose();
    batch_mean_ /= static_cast<S>(n);
    batch_var_.setZero(c_);
    for (const auto& t : x) {
      auto m = t.as_pixel_matrix();
      for (int ch = 0; ch < c_; ++ch) {
        batch_var_[ch] += (m.col(ch).array() - batch_mean_[ch]).square().sum();
      }
    }
    batch_var_ /= static_cast<S>(n);
    inv_std_ = (batch_var_.array() + eps_).rsqrt();

    BatchNormParams<S> p{gamma_, beta_, batch_mean_, batch_var_, eps_};
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = batchnorm(x[i], p);

    if (mode == Mode::train) {
      running_mean_ = (S(1) - momentum_) * running_mean_ + momentum_ * batch_mean_;
      running_var_ = (S(1) - momentum_) * running_var_ + momentum_ * batch_var_;
    }
  }

  void backward(const Batch<S>& x, const Batch<S>&, const Batch<S>& dy,
                Batch<S>& dx) override {
    const Eigen::Index n = x[0].pixels() * static_cast<Eigen::Index>(x.size());
    Vec<S> sum_dy = Vec<S>::Zero(c_);
    Vec<S> sum_dy_xhat = Vec<S>::Zero(c_);
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto xm = x[i].as_pixel_matrix();
      auto dym = dy[i].as_pixel_matrix();
      for (int ch = 0; ch < c_; ++ch) {
        sum_dy[ch] += dym.col(ch).sum();
        sum_dy_xhat[ch] +=
            ((xm.col(ch).array() - batch_mean_[ch]) * inv_std_[ch] * dym.col(ch).array()).sum();
      }
    }
    grad_beta_ = sum_dy;
    grad_gamma_ = sum_dy_xhat;

    // dx = gamma*istd/n * (n*dy - sum_dy - xhat * sum(dy*xhat))
    dx.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      dx[i] = Tensor<S>(x[i].h, x[i].w, x[i].c);
      auto xm = x[i].as_pixel_matrix();
      auto dym = dy[i].as_pixel_matrix();
      auto dxm = dx[i].as_pixel_matrix();
      for (int ch = 0; ch < c_; ++ch) {
        const S g_istd_n = gamma_[ch] * inv_std_[ch] / static_cast<S>(n);
        auto xhat = (xm.col(ch).array() - batch_mean_[ch]) * inv_std_[ch];
        dxm.col(ch) = (g_istd_n * (static_cast<S>(n) * dym.col(ch).array() - sum_dy[ch] -
                                   xhat * sum_dy_xhat[ch]))
                          .matrix();
      }
    }
  }

  void collect_params(std::vector<ParamView<S>>& out) override {
    out.push_back(
        {this->name() + ".gamma", gamma_.data(), grad_gamma_.data(), gamma_.size(), true});
    out.push_back({this->name() + ".beta", beta_.data(), grad_beta_.data(), beta_.size(), true});
    out.push_back({this->name() + ".running_mean", running_mean_.data(), nullptr,
                   running_mean_.size(), false});
    out.push_back({this->name() + ".running_var", running_var_.data(), nullptr,
                   running_var_.size(), false});
  }

  LayerCounts counts() const override { return {this->name(), 2L * c_, 4L * c_}; }

 private:
  int c_ = 0;
  S eps_ = static_cast<S>(1e-5);
  S momentum_ = static_cast<S>(0.1);
  Vec<S> gamma_, beta_, running_mean_, running_var_;
  Vec<S> grad_gamma_, grad_beta_;
  Vec<S> batch_mean_, batch_var_, inv_std_;
};

template <typename S>
class ReluLayer final : public TrainLayer<S> {
 public:
  std::string kind() const override { return "relu"; }
  std::array<int, 3> infer_shape(std::array<int, 3> in) override { return in; }

  void forward(const Batch<S>& x, Batch<S>& y, Mode) override {
    y.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = relu(x[i]);
  }

  void backward(const Batch<S>& x, const Batch<S>&, const Batch<S>& dy,
                Batch<S>& dx) override {
    dx.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      dx[i] = Tensor<S>(x[i].h, x[i].w, x[i].c);
      dx[i].data =
          (x[i].data.array() > S(0)).select(dy[i].data, Vec<S>::Zero(dy[i].size()));
    }
  }
};

template <typename S>
class MaxPoolLayer final : public TrainLayer<S> {
 public:
  explicit MaxPoolLayer(int k) : k_(k) {}
  std::string kind() const override { return "maxpool"; }

  std::array<int, 3> infer_shape(std::array<int, 3> in) override {
    return {in[0] / k_, in[1] / k_, in[2]};
  }

  void forward(const Batch<S>& x, Batch<S>& y, Mode) override {
    y.resize(x.size());
    argmax_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto& t = x[i];
      const int oh = t.h / k_;
      const int ow = t.w / k_;
      y[i] = Tensor<S>(oh, ow, t.c);
      argmax_[i].assign(static_cast<std::size_t>(y[i].size()), 0);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          for (int ci = 0; ci < t.c; ++ci) {
            S best = std::numeric_limits<S>::lowest();
            Eigen::Index best_idx = 0;
            for (int ky = 0; ky < k_; ++ky) {
              for (int kx = 0; kx < k_; ++kx) {
                const Eigen::Index idx =
                    (static_cast<Eigen::Index>(oy * k_ + ky) * t.w + ox * k_ + kx) * t.c + ci;
                if (t.data[idx] > best) {
                  best = t.data[idx];
                  best_idx = idx;
                }
              }
            }
            const Eigen::Index out_idx = (static_cast<Eigen::Index>(oy) * ow + ox) * t.c + ci;
            y[i].data[out_idx] = best;
            argmax_[i][out_idx] = best_idx;
          }
        }
      }
    }
  }

  void backward(const Batch<S>& x, const Batch<S>&, const Batch<S>& dy,
                Batch<S>& dx) override {
    dx.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      dx[i] = Tensor<S>(x[i].h, x[i].w, x[i].c);
      for (Eigen::Index j = 0; j < dy[i].size(); ++j) {
        dx[i].data[argmax_[i][j]] += dy[i].data[j];
      }
    }
  }

 private:
  int k_;
  std::vector<std::vector<Eigen::Index>> argmax_;
};

template <typename S>
class FlattenLayer final : public TrainLayer<S> {
 public:
  std::string kind() const override { return "flatten"; }
  std::array<int, 3> infer_shape(std::array<int, 3> in) override {
    return {1, 1, in[0] * in[1] * in[2]};
  }

  void forward(const Batch<S>& x, Batch<S>& y, Mode) override {
    y.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i] = Tensor<S>(1, 1, static_cast<int>(x[i].size()));
      y[i].data = x[i].data;
    }
  }

  void backward(const Batch<S>& x, const Batch<S>&, const Batch<S>& dy,
                Batch<S>& dx) override {
    dx.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      dx[i] = Tensor<S>(x[i].h, x[i].w, x[i].c);
      dx[i].data = dy[i].data;
    }
  }
};

template <typename S>
class DenseLayer final : public TrainLayer<S> {
 public:
  explicit DenseLayer(int units) : units_(units) {}
  std::string kind() const override { return "dense"; }

  std::array<int, 3> infer_shape(std::array<int, 3> in) override {
    in_ = in[0] * in[1] * in[2];
    weight_.setZero(in_, units_);
    bias_.setZero(units_);
    grad_weight_.setZero(in_, units_);
    grad_bias_.setZero(units_);
    return {1, 1, units_};
  }

  void init(std::uint64_t seed) override {
    std::mt19937_64 gen(seed);
    const double limit = std::sqrt(6.0 / static_cast<double>(in_));
    for (Eigen::Index i = 0; i < weight_.size(); ++i) {
      weight_.data()[i] = static_cast<S>(uniform(gen, -limit, limit));
    }
    bias_.setZero();
  }

  void forward(const Batch<S>& x, Batch<S>& y, Mode) override {
    y.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i] = Tensor<S>(1, 1, units_);
      y[i].data.noalias() = weight_.transpose() * x[i].data + bias_;
    }
  }

  void backward(const Batch<S>& x, const Batch<S>&, const Batch<S>& dy,
                Batch<S>& dx) override {
    grad_weight_.setZero();
    grad_bias_.setZero();
    dx.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      grad_weight_.noalias() += x[i].data * dy[i].data.transpose();
      grad_bias_ += dy[i].data;
      dx[i] = Tensor<S>(x[i].h, x[i].w, x[i].c);
      dx[i].data.noalias() = weight_ * dy[i].data;
    }
  }

  void collect_params(std::vector<ParamView<S>>& out) override {
    out.push_back({this->name() + ".weight", weight_.data(), grad_weight_.data(),
                   weight_.size(), true});
    out.push_back(
        {this->name() + ".bias", bias_.data(), grad_bias_.data(), bias_.size(), true});
  }

  LayerCounts counts() const override {
    const long n = static_cast<long>(weight_.size() + bias_.size());
    return {this->name(), n, n};
  }

 private:
  int units_, in_ = 0;
  Mat<S> weight_, grad_weight_;
  Vec<S> bias_, grad_bias_;
};

// Owns the layer chain and the inter-layer activations of the last forward
// pass so backward can be driven without an autograd tape.
template <typename S>
class Sequential {
 public:
  void add(std::unique_ptr<TrainLayer<S>> layer) { layers_.push_back(std::move(layer)); }

  // Resolves shapes and labels front to back; call once after adding layers.
  void build(std::array<int, 3> input_shape, std::uint64_t seed) {
    shapes_.clear();
    shapes_.push_back(input_shape);
    std::map<std::string, int> counters;
    for (auto& layer : layers_) {
      layer->set_label(layer->kind() + std::to_string(++counters[layer->kind()]));
      shapes_.push_back(layer->infer_shape(shapes_.back()));
    }
    for (auto& layer : layers_) {
      layer->init(derive_seed(seed, "init." + layer->name()));
    }
    params_.clear();
    for (auto& layer : layers_) layer->collect_params(params_);
  }

  const std::vector<std::array<int, 3>>& shapes() const { return shapes_; }
  std::array<int, 3> output_shape() const { return shapes_.back(); }
  std::vector<ParamView<S>>& params() { return params_; }
  const std::vector<ParamView<S>>& params() const { return params_; }

  Batch<S> forward(const Batch<S>& input, Mode mode) {
    acts_.assign(1, input);
    for (auto& layer : layers_) {
      Batch<S> y;
      layer->forward(acts_.back(), y, mode);
      acts_.push_back(std::move(y));
    }
    return acts_.back();
  }

  // dLoss w.r.t. the output of the last forward() call.
  void backward(const Batch<S>& dout) {
    Batch<S> dy = dout;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      Batch<S> dx;
      layers_[i]->backward(acts_[i], acts_[i + 1], dy, dx);
      dy = std::move(dx);
    }
  }

  void release_activations() {
    acts_.clear();
    acts_.shrink_to_fit();
  }

  std::vector<LayerCounts> layer_counts() const {
    std::vector<LayerCounts> out;
    for (const auto& layer : layers_) out.push_back(layer->counts());
    return out;
  }

  std::vector<S> snapshot_params() const {
    std::vector<S> out;
    for (const auto& p : params_) out.insert(out.end(), p.value, p.value + p.size);
    return out;
  }

  void restore_params(const std::vector<S>& blob) {
    std::size_t off = 0;
    for (auto& p : params_) {
      require(off + static_cast<std::size_t>(p.size) <= blob.size(),
              "restore_params: blob too small");
      std::copy_n(blob.data() + off, p.size, p.value);
      off += static_cast<std::size_t>(p.size);
    }
    require(off == blob.size(), "restore_params: blob size mismatch");
  }

 private:
  std::vector<std::unique_ptr<TrainLayer<S>>> layers_;
  std::vector<std::array<int, 3>> shapes_;
  std::vector<ParamView<S>> params_;
  std::vector<Batch<S>> acts_;
};

// Mean absolute error over a batch of scalar outputs; the gradient is the
// subgradient sign(pred - target)/n.
template <typename S>
S mae_loss(const Batch<S>& preds, const std::vector<S>& targets, Batch<S>* dpreds = nullptr) {
  require(preds.size() == targets.size() && !preds.empty(), "mae_loss: size mismatch");
  S total = 0;
  if (dpreds) dpreds->resize(preds.size());
  const S inv_n = S(1) / static_cast<S>(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    require(preds[i].size() == 1, "mae_loss: scalar outputs expected");
    const S diff = preds[i].data[0] - targets[i];
    total += std::abs(diff);
    if (dpreds) {
      (*dpreds)[i] = Tensor<S>(1, 1, 1);
      (*dpreds)[i].data[0] = (diff > S(0) ? S(1) : (diff < S(0) ? S(-1) : S(0))) * inv_n;
    }
  }
  return total * inv_n;
}

template <typename S>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<ParamView<S>>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Vec<S>::Zero(p.size));
        v_.push_back(Vec<S>::Zero(p.size));
      }
    }
    ++t_;
    const S bc1 = static_cast<S>(1.0 - std::pow(beta1_, t_));
    const S bc2 = static_cast<S>(1.0 - std::pow(beta2_, t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (!p.trainable || p.grad == nullptr) continue;
      Eigen::Map<Vec<S>> value(p.value, p.size);
      Eigen::Map<const Vec<S>> grad(p.grad, p.size);
      m_[i] = static_cast<S>(beta1_) * m_[i] + static_cast<S>(1 - beta1_) * grad;
      v_[i] = static_cast<S>(beta2_) * v_[i] +
              static_cast<S>(1 - beta2_) * grad.cwiseProduct(grad).eval();
      value.array() -= static_cast<S>(lr_) * (m_[i].array() / bc1) /
                       ((v_[i].array() / bc2).sqrt() + static_cast<S>(eps_));
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Vec<S>> m_, v_;
};

}  // namespace bmi::nn
