#include "bmi/features/backbones.hpp"

#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>

#include "bmi/common/rng.hpp"
#include "bmi/io/envelope.hpp"
#include "bmi/nn/kernels.hpp"

namespace bmi::features {

namespace {

using S = float;
using nn::BatchNormParams;
using nn::Conv2dParams;
using nn::DenseParams;
using nn::DepthwiseConv2dParams;
using nn::Tensor;

// Owns parameter structs with stable addresses and a flat named view of
// every blob for random init, archives and layout listings.
class GraphBackbone : public Backbone {
 public:
  const BackboneSpec& spec() const override { return spec_; }

  std::vector<std::pair<std::string, Eigen::Index>> parameter_layout() const override {
    std::vector<std::pair<std::string, Eigen::Index>> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.emplace_back(e.name, e.size);
    return out;
  }

  void load_weights(const std::string& ref) {
    if (ref.rfind("random:", 0) == 0) {
      init_random(std::stoull(ref.substr(7)));
      return;
    }
    load_archive(ref);
  }

  void save_archive(const std::string& path) const {
    std::vector<float> payload;
    nlohmann::json tensors = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& e : entries_) {
      tensors.push_back({{"name", e.name}, {"count", e.size}, {"offset", offset}});
      payload.insert(payload.end(), e.data, e.data + e.size);
      offset += static_cast<std::uint64_t>(e.size);
    }
    nlohmann::json header = {{"type", "backbone_weights"},
                             {"backbone", spec_.backbone_id},
                             {"tensors", tensors}};
    io::save_envelope_f32(path, std::move(header), payload);
  }

 protected:
  explicit GraphBackbone(BackboneSpec spec) : spec_(std::move(spec)) {}

  enum class Role { kernel, bias, bn_gamma, bn_beta, bn_mean, bn_var };

  Conv2dParams<S>& add_conv(const std::string& name, int k, int cin, int cout, int stride,
                            int pad, bool with_bias) {
    auto& p = convs_.emplace_back();
    p.kh = p.kw = k;
    p.in_ch = cin;
    p.out_ch = cout;
    p.stride = stride;
    p.pad = pad;
    p.kernel.setZero(static_cast<Eigen::Index>(k) * k * cin, cout);
    reg(name + ".kernel", p.kernel.data(), p.kernel.size(), p.kernel.rows(), Role::kernel);
    if (with_bias) {
      p.bias.setZero(cout);
      reg(name + ".bias", p.bias.data(), p.bias.size(), 0, Role::bias);
    }
    return p;
  }

  DepthwiseConv2dParams<S>& add_dwconv(const std::string& name, int k, int channels,
                                       int stride, int pad) {
    auto& p = dwconvs_.emplace_back();
    p.kh = p.kw = k;
    p.channels = channels;
    p.stride = stride;
    p.pad = pad;
    p.kernel.setZero(static_cast<Eigen::Index>(k) * k, channels);
    reg(name + ".kernel", p.kernel.data(), p.kernel.size(), k * k, Role::kernel);
    return p;
  }

  BatchNormParams<S>& add_bn(const std::string& name, int c) {
    auto& p = bns_.emplace_back();
    p.gamma.setOnes(c);
    p.beta.setZero(c);
    p.mean.setZero(c);
    p.var.setOnes(c);
    reg(name + ".gamma", p.gamma.data(), c, 0, Role::bn_gamma);
    reg(name + ".beta", p.beta.data(), c, 0, Role::bn_beta);
    reg(name + ".mean", p.mean.data(), c, 0, Role::bn_mean);
    reg(name + ".var", p.var.data(), c, 0, Role::bn_var);
    return p;
  }

  DenseParams<S>& add_dense(const std::string& name, int in, int out, bool with_bias = true) {
    auto& p = denses_.emplace_back();
    p.weight.setZero(in, out);
    reg(name + ".weight", p.weight.data(), p.weight.size(), in, Role::kernel);
    if (with_bias) {
      p.bias.setZero(out);
      reg(name + ".bias", p.bias.data(), p.bias.size(), 0, Role::bias);
    }
    return p;
  }

 private:
  struct Entry {
    std::string name;
    S* data;
    Eigen::Index size;
    Eigen::Index fan_in;
    Role role;
  };

  void reg(std::string name, S* data, Eigen::Index size, Eigen::Index fan_in, Role role) {
    entries_.push_back({std::move(name), data, size, fan_in, role});
  }

  void init_random(std::uint64_t seed) {
    for (auto& e : entries_) {
      std::mt19937_64 gen(derive_seed(seed, spec_.backbone_id + "." + e.name));
      switch (e.role) {
        case Role::kernel: {
          const double limit = std::sqrt(6.0 / static_cast<double>(std::max<Eigen::Index>(e.fan_in, 1)));
          for (Eigen::Index i = 0; i < e.size; ++i) {
            e.data[i] = static_cast<S>(uniform(gen, -limit, limit));
          }
          break;
        }
        case Role::bias:
          std::fill_n(e.data, e.size, S(0));
          break;
        case Role::bn_gamma:
        case Role::bn_var:
          for (Eigen::Index i = 0; i < e.size; ++i) {
            e.data[i] = static_cast<S>(uniform(gen, 0.9, 1.1));
          }
          break;
        case Role::bn_beta:
        case Role::bn_mean:
          for (Eigen::Index i = 0; i < e.size; ++i) {
            e.data[i] = static_cast<S>(uniform(gen, -0.05, 0.05));
          }
          break;
      }
    }
  }

  void load_archive(const std::string& path) {
    const io::Envelope env = io::load_envelope(path);
    if (env.header.value("type", "") != "backbone_weights") {
      throw std::runtime_error("weights: not a backbone archive: " + path);
    }
    if (env.header.value("backbone", "") != spec_.backbone_id) {
      throw std::runtime_error("weights: archive is for '" +
                               env.header.value("backbone", std::string()) +
                               "', wanted '" + spec_.backbone_id + "'");
    }
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> by_name;
    for (const auto& t : env.header.at("tensors")) {
      by_name[t.at("name").get<std::string>()] = {t.at("offset").get<std::uint64_t>(),
                                                  t.at("count").get<std::uint64_t>()};
    }
    for (auto& e : entries_) {
      auto it = by_name.find(e.name);
      if (it == by_name.end()) {
        throw std::runtime_error("weights: archive missing tensor '" + e.name + "'");
      }
      if (static_cast<Eigen::Index>(it->second.second) != e.size) {
        throw std::runtime_error("weights: size mismatch for tensor '" + e.name + "'");
      }
      std::copy_n(env.payload_f32.data() + it->second.first, e.size, e.data);
    }
  }

  BackboneSpec spec_;
  std::vector<Entry> entries_;
  std::deque<Conv2dParams<S>> convs_;
  std::deque<DepthwiseConv2dParams<S>> dwconvs_;
  std::deque<BatchNormParams<S>> bns_;
  std::deque<DenseParams<S>> denses_;
};

// ---------------------------------------------------------------------------
// stub: flattened pixels, no weights

class StubBackbone final : public GraphBackbone {
 public:
  explicit StubBackbone(BackboneSpec spec) : GraphBackbone(std::move(spec)) {}

  Eigen::VectorXf forward(const Tensor<S>& x) const override { return x.data; }
};

// ---------------------------------------------------------------------------
// vgg19: stacked 3x3 convs, feature = second fully-connected output (4096)

class Vgg19 final : public GraphBackbone {
 public:
  explicit Vgg19(BackboneSpec spec) : GraphBackbone(std::move(spec)) {
    static constexpr int kStages[5] = {2, 2, 4, 4, 4};
    static constexpr int kChannels[5] = {64, 128, 256, 512, 512};
    int cin = 3;
    for (int s = 0; s < 5; ++s) {
      stages_.emplace_back();
      for (int i = 0; i < kStages[s]; ++i) {
        const std::string name =
            "conv" + std::to_string(s + 1) + "_" + std::to_string(i + 1);
        stages_.back().push_back(&add_conv(name, 3, cin, kChannels[s], 1, 1, true));
        cin = kChannels[s];
      }
    }
    fc1_ = &add_dense("fc1", 7 * 7 * 512, 4096);
    fc2_ = &add_dense("fc2", 4096, 4096);
  }

  Eigen::VectorXf forward(const Tensor<S>& input) const override {
    Tensor<S> x = input;
    for (const auto& stage : stages_) {
      for (const auto* conv : stage) {
        x = nn::relu(nn::conv2d(x, *conv));
      }
      x = nn::maxpool2d(x, 2, 2);
    }
    nn::Vec<S> v = nn::flatten(x);
    v = nn::dense(v, *fc1_).cwiseMax(S(0));
    v = nn::dense(v, *fc2_).cwiseMax(S(0));
    return v;
  }

 private:
  std::vector<std::vector<const Conv2dParams<S>*>> stages_;
  const DenseParams<S>* fc1_;
  const DenseParams<S>* fc2_;
};

// ---------------------------------------------------------------------------
// resnet50: bottleneck residual stages, feature = global average pool (2048)

class ResNet50 final : public GraphBackbone {
 public:
  explicit ResNet50(BackboneSpec spec) : GraphBackbone(std::move(spec)) {
    stem_conv_ = &add_conv("stem.conv", 7, 3, 64, 2, 3, false);
    stem_bn_ = &add_bn("stem.bn", 64);
    static constexpr int kMid[4] = {64, 128, 256, 512};
    static constexpr int kBlocks[4] = {3, 4, 6, 3};
    int cin = 64;
    for (int stage = 0; stage < 4; ++stage) {
      const int out = kMid[stage] * 4;
      for (int b = 0; b < kBlocks[stage]; ++b) {
        const std::string name =
            "layer" + std::to_string(stage + 1) + "." + std::to_string(b);
        Block blk;
        blk.stride = (b == 0 && stage > 0) ? 2 : 1;
        blk.c1 = &add_conv(name + ".conv1", 1, cin, kMid[stage], 1, 0, false);
        blk.b1 = &add_bn(name + ".bn1", kMid[stage]);
        blk.c2 = &add_conv(name + ".conv2", 3, kMid[stage], kMid[stage], blk.stride, 1, false);
        blk.b2 = &add_bn(name + ".bn2", kMid[stage]);
        blk.c3 = &add_conv(name + ".conv3", 1, kMid[stage], out, 1, 0, false);
        blk.b3 = &add_bn(name + ".bn3", out);
        if (blk.stride != 1 || cin != out) {
          blk.down_c = &add_conv(name + ".down.conv", 1, cin, out, blk.stride, 0, false);
          blk.down_b = &add_bn(name + ".down.bn", out);
        }
        blocks_.push_back(blk);
        cin = out;
      }
    }
  }

  Eigen::VectorXf forward(const Tensor<S>& input) const override {
    Tensor<S> x = nn::relu(nn::batchnorm(nn::conv2d(input, *stem_conv_), *stem_bn_));
    x = nn::maxpool2d(x, 3, 2, 1);
    for (const auto& blk : blocks_) {
      Tensor<S> y = nn::relu(nn::batchnorm(nn::conv2d(x, *blk.c1), *blk.b1));
      y = nn::relu(nn::batchnorm(nn::conv2d(y, *blk.c2), *blk.b2));
      y = nn::batchnorm(nn::conv2d(y, *blk.c3), *blk.b3);
      Tensor<S> shortcut =
          blk.down_c ? nn::batchnorm(nn::conv2d(x, *blk.down_c), *blk.down_b) : x;
      x = nn::relu(nn::add(y, shortcut));
    }
    return nn::global_avgpool(x);
  }

 private:
  struct Block {
    const Conv2dParams<S>*c1, *c2, *c3;
    const BatchNormParams<S>*b1, *b2, *b3;
    const Conv2dParams<S>* down_c = nullptr;
    const BatchNormParams<S>* down_b = nullptr;
    int stride = 1;
  };
  const Conv2dParams<S>* stem_conv_;
  const BatchNormParams<S>* stem_bn_;
  std::vector<Block> blocks_;
};

// ---------------------------------------------------------------------------
// densenet121: dense blocks with channel concatenation, feature = GAP (1024)

class DenseNet121 final : public GraphBackbone {
 public:
  explicit DenseNet121(BackboneSpec spec) : GraphBackbone(std::move(spec)) {
    stem_conv_ = &add_conv("stem.conv", 7, 3, 64, 2, 3, false);
    stem_bn_ = &add_bn("stem.bn", 64);
    static constexpr int kBlocks[4] = {6, 12, 24, 16};
    constexpr int growth = 32;
    constexpr int bottleneck = 4 * growth;
    int channels = 64;
    for (int stage = 0; stage < 4; ++stage) {
      blocks_.emplace_back();
      for (int i = 0; i < kBlocks[stage]; ++i) {
        const std::string name =
            "block" + std::to_string(stage + 1) + "." + std::to_string(i);
        Layer layer;
        layer.b1 = &add_bn(name + ".bn1", channels);
        layer.c1 = &add_conv(name + ".conv1", 1, channels, bottleneck, 1, 0, false);
        layer.b2 = &add_bn(name + ".bn2", bottleneck);
        layer.c2 = &add_conv(name + ".conv2", 3, bottleneck, growth, 1, 1, false);
        blocks_.back().push_back(layer);
        channels += growth;
      }
      if (stage < 3) {
        const std::string name = "transition" + std::to_string(stage + 1);
        Transition t;
        t.bn = &add_bn(name + ".bn", channels);
        channels /= 2;
        t.conv = &add_conv(name + ".conv", 1, channels * 2, channels, 1, 0, false);
        transitions_.push_back(t);
      }
    }
    final_bn_ = &add_bn("final.bn", channels);
  }

  Eigen::VectorXf forward(const Tensor<S>& input) const override {
    Tensor<S> x = nn::relu(nn::batchnorm(nn::conv2d(input, *stem_conv_), *stem_bn_));
    x = nn::maxpool2d(x, 3, 2, 1);
    for (std::size_t stage = 0; stage < blocks_.size(); ++stage) {
      for (const auto& layer : blocks_[stage]) {
        Tensor<S> y = nn::relu(nn::batchnorm(x, *layer.b1));
        y = nn::conv2d(y, *layer.c1);
        y = nn::relu(nn::batchnorm(y, *layer.b2));
        y = nn::conv2d(y, *layer.c2);
        x = nn::concat_channels(x, y);
      }
      if (stage < transitions_.size()) {
        const auto& t = transitions_[stage];
        x = nn::relu(nn::batchnorm(x, *t.bn));
        x = nn::conv2d(x, *t.conv);
        x = nn::avgpool2d(x, 2, 2);
      }
    }
    x = nn::relu(nn::batchnorm(x, *final_bn_));
    return nn::global_avgpool(x);
  }

 private:
  struct Layer {
    const BatchNormParams<S>* b1;
    const Conv2dParams<S>* c1;
    const BatchNormParams<S>* b2;
    const Conv2dParams<S>* c2;
  };
  struct Transition {
    const BatchNormParams<S>* bn;
    const Conv2dParams<S>* conv;
  };
  const Conv2dParams<S>* stem_conv_;
  const BatchNormParams<S>* stem_bn_;
  std::vector<std::vector<Layer>> blocks_;
  std::vector<Transition> transitions_;
  const BatchNormParams<S>* final_bn_;
};

// ---------------------------------------------------------------------------
// mobilenet_v2 x0.5: inverted residuals with depthwise convs, GAP (1280)

int make_divisible(double v, int divisor = 8) {
  int new_v = std::max(divisor, (static_cast<int>(v + divisor / 2.0) / divisor) * divisor);
  if (new_v < 0.9 * v) new_v += divisor;
  return new_v;
}

class MobileNetV2Half final : public GraphBackbone {
 public:
  explicit MobileNetV2Half(BackboneSpec spec) : GraphBackbone(std::move(spec)) {
    constexpr double alpha = 0.5;
    int cin = make_divisible(32 * alpha);
    stem_conv_ = &add_conv("stem.conv", 3, 3, cin, 2, 1, false);
    stem_bn_ = &add_bn("stem.bn", cin);

    struct Cfg {
      int t, c, n, s;
    };
    static constexpr Cfg cfg[] = {{1, 16, 1, 1},  {6, 24, 2, 2},  {6, 32, 3, 2},
                                  {6, 64, 4, 2},  {6, 96, 3, 1},  {6, 160, 3, 2},
                                  {6, 320, 1, 1}};
    int block_idx = 0;
    for (const auto& row : cfg) {
      const int cout = make_divisible(row.c * alpha);
      for (int i = 0; i < row.n; ++i) {
        const std::string name = "block" + std::to_string(block_idx++);
        Block blk;
        blk.stride = i == 0 ? row.s : 1;
        blk.residual = blk.stride == 1 && cin == cout;
        const int hidden = static_cast<int>(std::lround(cin * static_cast<double>(row.t)));
        if (row.t != 1) {
          blk.expand = &add_conv(name + ".expand", 1, cin, hidden, 1, 0, false);
          blk.expand_bn = &add_bn(name + ".expand_bn", hidden);
        }
        blk.dw = &add_dwconv(name + ".dw", 3, hidden, blk.stride, 1);
        blk.dw_bn = &add_bn(name + ".dw_bn", hidden);
        blk.project = &add_conv(name + ".project", 1, hidden, cout, 1, 0, false);
        blk.project_bn = &add_bn(name + ".project_bn", cout);
        blocks_.push_back(blk);
        cin = cout;
      }
    }
    head_conv_ = &add_conv("head.conv", 1, cin, 1280, 1, 0, false);
    head_bn_ = &add_bn("head.bn", 1280);
  }

  Eigen::VectorXf forward(const Tensor<S>& input) const override {
    Tensor<S> x = nn::relu6(nn::batchnorm(nn::conv2d(input, *stem_conv_), *stem_bn_));
    for (const auto& blk : blocks_) {
      Tensor<S> y = x;
      if (blk.expand) {
        y = nn::relu6(nn::batchnorm(nn::conv2d(y, *blk.expand), *blk.expand_bn));
      }
      y = nn::relu6(nn::batchnorm(nn::depthwise_conv2d(y, *blk.dw), *blk.dw_bn));
      y = nn::batchnorm(nn::conv2d(y, *blk.project), *blk.project_bn);
      x = blk.residual ? nn::add(x, y) : std::move(y);
    }
    x = nn::relu6(nn::batchnorm(nn::conv2d(x, *head_conv_), *head_bn_));
    return nn::global_avgpool(x);
  }

 private:
  struct Block {
    const Conv2dParams<S>* expand = nullptr;
    const BatchNormParams<S>* expand_bn = nullptr;
    const DepthwiseConv2dParams<S>* dw = nullptr;
    const BatchNormParams<S>* dw_bn = nullptr;
    const Conv2dParams<S>* project = nullptr;
    const BatchNormParams<S>* project_bn = nullptr;
    bool residual = false;
    int stride = 1;
  };
  const Conv2dParams<S>* stem_conv_;
  const BatchNormParams<S>* stem_bn_;
  std::vector<Block> blocks_;
  const Conv2dParams<S>* head_conv_;
  const BatchNormParams<S>* head_bn_;
};

// ---------------------------------------------------------------------------
// lightcnn29: MFM activations throughout, 512-wide embedding after the
// fully-connected MFM pair. Operates on luminance; RGB is collapsed first.

class LightCnn29 final : public GraphBackbone {
 public:
  explicit LightCnn29(BackboneSpec spec) : GraphBackbone(std::move(spec)) {
    conv1_ = &add_conv("conv1", 5, 1, 96, 1, 2, true);
    res1_ = make_res_group("res1", 48, 1);
    conv2a_ = &add_conv("conv2a", 1, 48, 96, 1, 0, true);
    conv2_ = &add_conv("conv2", 3, 48, 192, 1, 1, true);
    res2_ = make_res_group("res2", 96, 2);
    conv3a_ = &add_conv("conv3a", 1, 96, 192, 1, 0, true);
    conv3_ = &add_conv("conv3", 3, 96, 384, 1, 1, true);
    res3_ = make_res_group("res3", 192, 3);
    conv4a_ = &add_conv("conv4a", 1, 192, 384, 1, 0, true);
    conv4_ = &add_conv("conv4", 3, 192, 256, 1, 1, true);
    res4_ = make_res_group("res4", 128, 4);
    conv5a_ = &add_conv("conv5a", 1, 128, 256, 1, 0, true);
    conv5_ = &add_conv("conv5", 3, 128, 256, 1, 1, true);
    fc1_ = &add_dense("fc1", 8 * 8 * 128, 1024);
  }

  Eigen::VectorXf forward(const Tensor<S>& input) const override {
    // Collapse RGB to luminance; the MFM stack is single-channel at entry.
    Tensor<S> x(input.h, input.w, 1);
    for (Eigen::Index i = 0; i < input.pixels(); ++i) {
      const S* p = input.data.data() + i * 3;
      x.data[i] = (p[0] + p[1] + p[2]) / S(3);
    }
    x = nn::mfm(nn::conv2d(x, *conv1_));
    x = nn::maxpool2d(x, 2, 2);
    x = run_res_group(x, res1_);
    x = nn::mfm(nn::conv2d(x, *conv2a_));
    x = nn::mfm(nn::conv2d(x, *conv2_));
    x = nn::maxpool2d(x, 2, 2);
    x = run_res_group(x, res2_);
    x = nn::mfm(nn::conv2d(x, *conv3a_));
    x = nn::mfm(nn::conv2d(x, *conv3_));
    x = nn::maxpool2d(x, 2, 2);
    x = run_res_group(x, res3_);
    x = nn::mfm(nn::conv2d(x, *conv4a_));
    x = nn::mfm(nn::conv2d(x, *conv4_));
    x = run_res_group(x, res4_);
    x = nn::mfm(nn::conv2d(x, *conv5a_));
    x = nn::mfm(nn::conv2d(x, *conv5_));
    x = nn::maxpool2d(x, 2, 2);
    return nn::mfm_vec(nn::dense(nn::flatten(x), *fc1_));
  }

 private:
  struct ResBlock {
    const Conv2dParams<S>* a;
    const Conv2dParams<S>* b;
  };

  std::vector<ResBlock> make_res_group(const std::string& name, int channels, int count) {
    std::vector<ResBlock> group;
    for (int i = 0; i < count; ++i) {
      ResBlock blk;
      blk.a = &add_conv(name + "." + std::to_string(i) + ".a", 3, channels, 2 * channels, 1, 1,
                        true);
      blk.b = &add_conv(name + "." + std::to_string(i) + ".b", 3, channels, 2 * channels, 1, 1,
                        true);
      group.push_back(blk);
    }
    return group;
  }

  static Tensor<S> run_res_group(const Tensor<S>& input, const std::vector<ResBlock>& group) {
    Tensor<S> x = input;
    for (const auto& blk : group) {
      Tensor<S> y = nn::mfm(nn::conv2d(x, *blk.a));
      y = nn::mfm(nn::conv2d(y, *blk.b));
      x = nn::add(x, y);
    }
    return x;
  }

  const Conv2dParams<S>*conv1_, *conv2a_, *conv2_, *conv3a_, *conv3_, *conv4a_, *conv4_,
      *conv5a_, *conv5_;
  std::vector<ResBlock> res1_, res2_, res3_, res4_;
  const DenseParams<S>* fc1_;
};

}  // namespace

const std::vector<BackboneSpec>& registry() {
  static const std::vector<BackboneSpec> specs = [] {
    std::vector<BackboneSpec> v;
    v.push_back({"vgg19", 224, 224, 4096, 140000000L, "vgg19.bmiw",
                 facepipe::NormSpec::imagenet()});
    v.push_back({"resnet50", 224, 224, 2048, 23500000L, "resnet50.bmiw",
                 facepipe::NormSpec::imagenet()});
    v.push_back({"densenet121", 224, 224, 1024, 7000000L, "densenet121.bmiw",
                 facepipe::NormSpec::imagenet()});
    v.push_back({"mobilenet_v2_05_224", 224, 224, 1280, 688000L,
                 "mobilenet_v2_05_224.bmiw", facepipe::NormSpec::imagenet()});
    v.push_back({"lightcnn29", 128, 128, 512, 11000000L, "lightcnn29.bmiw",
                 facepipe::NormSpec::unit()});
    v.push_back({"stub", 16, 16, 16 * 16 * 3, 0L, "", facepipe::NormSpec::unit()});
    return v;
  }();
  return specs;
}

const BackboneSpec& find_backbone(const std::string& backbone_id) {
  for (const auto& spec : registry()) {
    if (spec.backbone_id == backbone_id) return spec;
  }
  throw std::invalid_argument("unknown backbone_id '" + backbone_id + "'");
}

std::unique_ptr<Backbone> make_backbone(const std::string& backbone_id,
                                        const std::string& weights_ref) {
  const BackboneSpec& spec = find_backbone(backbone_id);
  std::unique_ptr<GraphBackbone> bb;
  if (backbone_id == "stub") {
    return std::make_unique<StubBackbone>(spec);
  } else if (backbone_id == "vgg19") {
    bb = std::make_unique<Vgg19>(spec);
  } else if (backbone_id == "resnet50") {
    bb = std::make_unique<ResNet50>(spec);
  } else if (backbone_id == "densenet121") {
    bb = std::make_unique<DenseNet121>(spec);
  } else if (backbone_id == "mobilenet_v2_05_224") {
    bb = std::make_unique<MobileNetV2Half>(spec);
  } else if (backbone_id == "lightcnn29") {
    bb = std::make_unique<LightCnn29>(spec);
  } else {
    throw std::invalid_argument("unknown backbone_id '" + backbone_id + "'");
  }
  if (weights_ref.empty()) {
    throw std::runtime_error("backbone '" + backbone_id + "' requires a weights file");
  }
  bb->load_weights(weights_ref);
  return bb;
}

void save_backbone_weights(const Backbone& backbone, const std::string& path) {
  const auto* graph = dynamic_cast<const GraphBackbone*>(&backbone);
  if (graph == nullptr) {
    throw std::invalid_argument("save_backbone_weights: unsupported backbone");
  }
  graph->save_archive(path);
}

FeatureVector extract_features(const nn::Tensor<float>& crop_tensor, const Backbone& backbone) {
  const BackboneSpec& spec = backbone.spec();
  if (crop_tensor.h != spec.input_h || crop_tensor.w != spec.input_w || crop_tensor.c != 3) {
    throw std::invalid_argument("extract_features: input " + crop_tensor.shape_str() +
                                " does not match backbone '" + spec.backbone_id + "' (" +
                                std::to_string(spec.input_h) + ", " +
                                std::to_string(spec.input_w) + ", 3)");
  }
  FeatureVector fv{spec.backbone_id, backbone.forward(crop_tensor)};
  if (fv.dim() != spec.feature_dim) {
    throw std::runtime_error("extract_features: backbone '" + spec.backbone_id +
                             "' produced dim " + std::to_string(fv.dim()) + ", registry says " +
                             std::to_string(spec.feature_dim));
  }
  if (!fv.values.allFinite()) {
    throw std::runtime_error("extract_features: non-finite values from '" + spec.backbone_id +
                             "'");
  }
  return fv;
}

}  // namespace bmi::features
