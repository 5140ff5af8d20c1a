#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmi/common/rng.hpp"
#include "bmi/io/envelope.hpp"
#include "bmi/nn/net.hpp"

// End-to-end CNN for direct BMI regression: three conv/batchnorm/maxpool
// blocks into a 200-unit dense layer and a scalar output, trained with Adam
// on MAE loss. Templated on scalar so the gradient checks can run in double
// while full-size training runs in float.

namespace bmi::customcnn {

struct LayerSpec {
  enum class Kind { conv, batchnorm, relu, maxpool, flatten, dense };
  Kind kind;
  int arg = 0;     // conv: output channels, maxpool: window, dense: units
  int kernel = 3;  // conv only
};

struct CustomCnnSpec {
  int input_h = 224;
  int input_w = 224;
  int input_c = 3;
  std::vector<LayerSpec> layers;

  // The full-size regression network (input 224x224x3, scalar output).
  static CustomCnnSpec standard();
  // Tiny conv->relu->pool->dense variant (input 8x8x3) used by the
  // finite-difference gradient checks.
  static CustomCnnSpec miniature();

  nlohmann::json to_json() const;
  static CustomCnnSpec from_json(const nlohmann::json& doc);
};

struct TrainConfig {
  double learning_rate = 0.001;
  int epochs = 150;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double validation_fraction = 0.10;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_mae = 0.0;
  double val_mae = 0.0;
};

template <typename S>
struct LabelledImage {
  nn::Tensor<S> image;
  S bmi;
};

template <typename S>
struct CustomCnn {
  CustomCnnSpec spec;
  nn::Sequential<S> net;
};

template <typename S>
CustomCnn<S> build_custom_cnn(const CustomCnnSpec& spec, std::uint64_t seed) {
  CustomCnn<S> model;
  model.spec = spec;
  for (const auto& layer : spec.layers) {
    switch (layer.kind) {
      case LayerSpec::Kind::conv:
        model.net.add(std::make_unique<nn::ConvLayer<S>>(layer.kernel, layer.arg));
        break;
      case LayerSpec::Kind::batchnorm:
        model.net.add(std::make_unique<nn::BatchNormLayer<S>>());
        break;
      case LayerSpec::Kind::relu:
        model.net.add(std::make_unique<nn::ReluLayer<S>>());
        break;
      case LayerSpec::Kind::maxpool:
        model.net.add(std::make_unique<nn::MaxPoolLayer<S>>(layer.arg));
        break;
      case LayerSpec::Kind::flatten:
        model.net.add(std::make_unique<nn::FlattenLayer<S>>());
        break;
      case LayerSpec::Kind::dense:
        model.net.add(std::make_unique<nn::DenseLayer<S>>(layer.arg));
        break;
    }
  }
  model.net.build({spec.input_h, spec.input_w, spec.input_c}, seed);
  const auto out = model.net.output_shape();
  nn::require(out[0] == 1 && out[1] == 1 && out[2] == 1,
              "build_custom_cnn: network must end in a single scalar output");
  return model;
}

template <typename S>
S predict_cnn(CustomCnn<S>& model, const nn::Tensor<S>& image) {
  nn::require(image.h == model.spec.input_h && image.w == model.spec.input_w &&
                  image.c == model.spec.input_c,
              "predict_cnn: input " + image.shape_str() + " does not match the network");
  const auto out = model.net.forward({image}, nn::Mode::infer);
  model.net.release_activations();
  const S value = out[0].data[0];
  nn::require(std::isfinite(static_cast<double>(value)), "predict_cnn: non-finite output");
  return value;
}

template <typename S>
std::vector<S> predict_cnn_batch(CustomCnn<S>& model, const nn::Batch<S>& images) {
  std::vector<S> out;
  out.reserve(images.size());
  for (const auto& image : images) out.push_back(predict_cnn(model, image));
  return out;
}

// Trains in place. Every epoch contributes one EpochStats row; the weights
// of the best validation epoch are restored at the end. With
// validation_fraction = 0 the train metric doubles as the selection metric.
template <typename S>
std::vector<EpochStats> train_custom_cnn(CustomCnn<S>& model,
                                         const std::vector<LabelledImage<S>>& data,
                                         const TrainConfig& config) {
  if (data.empty()) {
    throw std::invalid_argument("train_custom_cnn: empty training set");
  }
  nn::require(config.learning_rate > 0.0, "train_custom_cnn: learning_rate must be positive");
  nn::require(config.epochs >= 1, "train_custom_cnn: epochs must be >= 1");
  nn::require(config.validation_fraction >= 0.0 && config.validation_fraction < 1.0,
              "train_custom_cnn: validation_fraction in [0, 1)");
  for (const auto& item : data) {
    nn::require(item.image.h == model.spec.input_h && item.image.w == model.spec.input_w &&
                    item.image.c == model.spec.input_c,
                "train_custom_cnn: sample shape " + item.image.shape_str() +
                    " does not match the network");
  }

  // Seeded validation carve-out.
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 split_gen(derive_seed(config.seed, "cnn.val_split"));
  shuffle_indices(order, split_gen);
  const std::size_t val_n = static_cast<std::size_t>(config.validation_fraction * data.size());
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + val_n);
  std::vector<std::size_t> train_idx(order.begin() + val_n, order.end());
  if (train_idx.empty()) {
    throw std::invalid_argument("train_custom_cnn: validation split leaves no training data");
  }

  nn::Adam<S> optimizer(config.learning_rate);
  std::vector<EpochStats> history;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<S> best_params;

  auto evaluate = [&](const std::vector<std::size_t>& idx) {
    double total = 0.0;
    for (std::size_t i : idx) {
      total += std::abs(static_cast<double>(predict_cnn(model, data[i].image)) -
                        static_cast<double>(data[i].bmi));
    }
    return idx.empty() ? 0.0 : total / static_cast<double>(idx.size());
  };

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::mt19937_64 epoch_gen(
        derive_seed(config.seed, "cnn.epoch." + std::to_string(epoch)));
    shuffle_indices(train_idx, epoch_gen);

    double running = 0.0;
    std::size_t seen = 0;
    const std::size_t bs = std::max(1, config.batch_size);
    for (std::size_t start = 0; start < train_idx.size(); start += bs) {
      const std::size_t end = std::min(train_idx.size(), start + bs);
      nn::Batch<S> batch;
      std::vector<S> targets;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(data[train_idx[i]].image);
        targets.push_back(data[train_idx[i]].bmi);
      }
      const auto preds = model.net.forward(batch, nn::Mode::train);
      nn::Batch<S> dpreds;
      const S loss = nn::mae_loss(preds, targets, &dpreds);
      if (!std::isfinite(static_cast<double>(loss))) {
        throw std::runtime_error("train_custom_cnn: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch starting at " +
                                 std::to_string(start));
      }
      model.net.backward(dpreds);
      optimizer.step(model.net.params());
      running += static_cast<double>(loss) * static_cast<double>(end - start);
      seen += end - start;
    }
    model.net.release_activations();

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_mae = running / static_cast<double>(seen);
    stats.val_mae = val_idx.empty() ? stats.train_mae : evaluate(val_idx);
    history.push_back(stats);

    if (stats.val_mae < best_val) {
      best_val = stats.val_mae;
      best_params = model.net.snapshot_params();
    }
  }
  if (!best_params.empty()) {
    model.net.restore_params(best_params);
  }
  return history;
}

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path);

// Checkpoints reuse the shared model envelope with type = custom_cnn; the
// payload is every parameter blob (including batchnorm running statistics)
// in registration order.
template <typename S>
void save_checkpoint(const CustomCnn<S>& model, const std::string& path) {
  const std::vector<S> params = model.net.snapshot_params();
  std::vector<double> payload(params.begin(), params.end());
  nlohmann::json header = {{"type", "custom_cnn"}, {"spec", model.spec.to_json()}};
  io::save_envelope_f64(path, std::move(header), payload);
}

template <typename S>
CustomCnn<S> load_checkpoint(const std::string& path) {
  const io::Envelope env = io::load_envelope(path);
  if (env.header.value("type", "") != "custom_cnn") {
    throw std::runtime_error("checkpoint: not a custom_cnn model: " + path);
  }
  CustomCnn<S> model =
      build_custom_cnn<S>(CustomCnnSpec::from_json(env.header.at("spec")), 0);
  std::vector<S> params(env.payload_f64.begin(), env.payload_f64.end());
  model.net.restore_params(params);
  return model;
}

}  // namespace bmi::customcnn
