#include "bmi/regression/model_io.hpp"

#include <stdexcept>

#include "bmi/io/envelope.hpp"

namespace bmi::regression {

void save_model(const RidgeModel& model, const std::string& path) {
  nlohmann::json header = {
      {"type", "ridge"},
      {"backbone_id", model.backbone_id},
      {"dim", model.weights.size()},
      {"hyperparams", {{"lambda", model.lambda}}},
  };
  std::vector<double> payload(model.weights.data(), model.weights.data() + model.weights.size());
  payload.push_back(model.intercept);
  io::save_envelope_f64(path, std::move(header), payload);
}

void save_model(const SvrModel& model, const std::string& path) {
  nlohmann::json header = {
      {"type", "svr"},
      {"backbone_id", model.backbone_id},
      {"dim", model.support_vectors.cols()},
      {"n_sv", model.support_vectors.rows()},
      {"hyperparams",
       {{"kernel", model.kernel.kind == KernelKind::linear ? "linear" : "rbf"},
        {"gamma", model.kernel.gamma},
        {"c", model.c},
        {"epsilon", model.epsilon}}},
  };
  std::vector<double> payload;
  payload.reserve(static_cast<std::size_t>(model.dual_coeffs.size() +
                                           model.support_vectors.size() + 1));
  payload.insert(payload.end(), model.dual_coeffs.data(),
                 model.dual_coeffs.data() + model.dual_coeffs.size());
  for (Eigen::Index r = 0; r < model.support_vectors.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.support_vectors.cols(); ++c) {
      payload.push_back(model.support_vectors(r, c));
    }
  }
  payload.push_back(model.intercept);
  io::save_envelope_f64(path, std::move(header), payload);
}

std::string model_type(const std::string& path) {
  return io::load_envelope(path).header.value("type", "");
}

RegressionModel load_regression_model(const std::string& path) {
  const io::Envelope env = io::load_envelope(path);
  const std::string type = env.header.value("type", "");
  if (type == "ridge") {
    RidgeModel model;
    model.backbone_id = env.header.value("backbone_id", "");
    model.lambda = env.header.at("hyperparams").value("lambda", 0.0);
    const auto dim = env.header.at("dim").get<Eigen::Index>();
    if (static_cast<Eigen::Index>(env.payload_f64.size()) != dim + 1) {
      throw std::runtime_error("model: ridge payload size mismatch in " + path);
    }
    model.weights = Eigen::Map<const Eigen::VectorXd>(env.payload_f64.data(), dim);
    model.intercept = env.payload_f64.back();
    return model;
  }
  if (type == "svr") {
    SvrModel model;
    model.backbone_id = env.header.value("backbone_id", "");
    const auto& hp = env.header.at("hyperparams");
    model.kernel.kind =
        hp.value("kernel", "linear") == std::string("rbf") ? KernelKind::rbf : KernelKind::linear;
    model.kernel.gamma = hp.value("gamma", 1.0);
    model.c = hp.value("c", 1.0);
    model.epsilon = hp.value("epsilon", 0.1);
    const auto dim = env.header.at("dim").get<Eigen::Index>();
    const auto n_sv = env.header.at("n_sv").get<Eigen::Index>();
    if (static_cast<Eigen::Index>(env.payload_f64.size()) != n_sv + n_sv * dim + 1) {
      throw std::runtime_error("model: svr payload size mismatch in " + path);
    }
    model.dual_coeffs = Eigen::Map<const Eigen::VectorXd>(env.payload_f64.data(), n_sv);
    model.support_vectors.resize(n_sv, dim);
    std::size_t off = static_cast<std::size_t>(n_sv);
    for (Eigen::Index r = 0; r < n_sv; ++r) {
      for (Eigen::Index c = 0; c < dim; ++c) {
        model.support_vectors(r, c) = env.payload_f64[off++];
      }
    }
    model.intercept = env.payload_f64.back();
    return model;
  }
  throw std::runtime_error("model: '" + path + "' has type '" + type +
                           "', expected a regression model");
}

double predict(const RegressionModel& model, const Eigen::VectorXd& features) {
  return std::visit([&](const auto& m) { return predict(m, features); }, model);
}

const std::string& model_backbone_id(const RegressionModel& model) {
  return std::visit([](const auto& m) -> const std::string& { return m.backbone_id; }, model);
}

}  // namespace bmi::regression
