#pragma once

#include <string>

#include <Eigen/Dense>

namespace bmi::regression {

// Design matrix and targets for a regression fit. Rows of X align with y.
struct TrainMatrix {
  Eigen::MatrixXd X;  // n x d feature rows
  Eigen::VectorXd y;  // n ground-truth BMI values, kg/m^2

  void validate() const;  // throws on empty, misaligned or non-finite data
};

struct RidgeModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;  // kg/m^2
  double lambda = 0.0;
  std::string backbone_id;
};

// Minimizes lambda*||w||^2 + sum_i (w.x_i + intercept - y_i)^2 in closed
// form, w = (X'X + lambda I)^-1 X'y on centered data when fit_intercept is
// set (the intercept itself is never penalized). lambda = 0 requires full
// column rank; a rank-deficient system raises an explicit error.
RidgeModel fit_ridge(const TrainMatrix& data, double lambda, bool fit_intercept = true);

// lambda*||w||^2 + sum_i (w.x_i + intercept - y_i)^2
double ridge_objective(const Eigen::VectorXd& weights, double intercept,
                       const TrainMatrix& data, double lambda);

double predict(const RidgeModel& model, const Eigen::VectorXd& features);

}  // namespace bmi::regression
