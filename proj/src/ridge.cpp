#include "bmi/regression/ridge.hpp"

#include <stdexcept>

namespace bmi::regression {

void TrainMatrix::validate() const {
  if (X.rows() < 1) {
    throw std::invalid_argument("train matrix: need at least one row");
  }
  if (X.rows() != y.size()) {
    throw std::invalid_argument("train matrix: X has " + std::to_string(X.rows()) +
                                " rows but y has " + std::to_string(y.size()));
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw std::invalid_argument("train matrix: non-finite entries");
  }
}

RidgeModel fit_ridge(const TrainMatrix& data, double lambda, bool fit_intercept) {
  data.validate();
  if (lambda < 0.0) {
    throw std::invalid_argument("fit_ridge: lambda must be nonnegative");
  }
  const Eigen::Index d = data.X.cols();

  Eigen::RowVectorXd x_mean = Eigen::RowVectorXd::Zero(d);
  double y_mean = 0.0;
  Eigen::MatrixXd xc = data.X;
  Eigen::VectorXd yc = data.y;
  if (fit_intercept) {
    x_mean = data.X.colwise().mean();
    y_mean = data.y.mean();
    xc.rowwise() -= x_mean;
    yc.array() -= y_mean;
  }

  RidgeModel model;
  model.lambda = lambda;
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
    if (qr.rank() < d) {
      throw std::runtime_error("fit_ridge: rank-deficient design at lambda = 0 (rank " +
                               std::to_string(qr.rank()) + " < " + std::to_string(d) + ")");
    }
    model.weights = qr.solve(yc);
  } else {
    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += lambda;
    model.weights = gram.ldlt().solve(xc.transpose() * yc);
  }
  model.intercept = fit_intercept ? y_mean - x_mean.dot(model.weights) : 0.0;
  return model;
}

double ridge_objective(const Eigen::VectorXd& weights, double intercept,
                       const TrainMatrix& data, double lambda) {
  if (weights.size() != data.X.cols()) {
    throw std::invalid_argument("ridge_objective: weight/feature dimension mismatch");
  }
  const Eigen::VectorXd residual =
      data.X * weights + Eigen::VectorXd::Constant(data.X.rows(), intercept) - data.y;
  return lambda * weights.squaredNorm() + residual.squaredNorm();
}

double predict(const RidgeModel& model, const Eigen::VectorXd& features) {
  if (features.size() != model.weights.size()) {
    throw std::invalid_argument("predict(ridge): feature dim " +
                                std::to_string(features.size()) + " != model dim " +
                                std::to_string(model.weights.size()));
  }
  return model.weights.dot(features) + model.intercept;
}

}  // namespace bmi::regression
