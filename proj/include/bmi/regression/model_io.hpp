#pragma once

#include <string>
#include <variant>

#include "bmi/regression/ridge.hpp"
#include "bmi/regression/svr.hpp"

namespace bmi::regression {

// .bmimodel files: the shared envelope with a JSON header
// {type, backbone_id, dim, hyperparams, ...} and an f64 payload.
void save_model(const RidgeModel& model, const std::string& path);
void save_model(const SvrModel& model, const std::string& path);

// "ridge", "svr" or "custom_cnn" without loading the payload semantics.
std::string model_type(const std::string& path);

using RegressionModel = std::variant<RidgeModel, SvrModel>;
RegressionModel load_regression_model(const std::string& path);

double predict(const RegressionModel& model, const Eigen::VectorXd& features);
const std::string& model_backbone_id(const RegressionModel& model);

}  // namespace bmi::regression
