#pragma once

#include <string>

#include <Eigen/Dense>

#include "bmi/regression/ridge.hpp"  // TrainMatrix

namespace bmi::regression {

enum class KernelKind { linear, rbf };

struct SvrKernel {
  KernelKind kind = KernelKind::linear;
  double gamma = 1.0;  // rbf only
};

double kernel_eval(const SvrKernel& kernel, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct SvrOptions {
  double c = 1.0;
  double epsilon = 0.1;
  SvrKernel kernel;
  long max_iter = 100000;
  double tol = 1e-3;  // duality-gap tolerance, relative to the objective scale
};

// Epsilon-SVR in the signed-dual parameterization: coefficients beta_i in
// [-c, c] with sum(beta) = 0; prediction f(x) = sum_i beta_i K(x_i, x) + b.
struct SvrModel {
  Eigen::VectorXd dual_coeffs;      // nonzero betas, aligned with support_vectors rows
  Eigen::MatrixXd support_vectors;  // one row per retained training point
  double intercept = 0.0;
  SvrKernel kernel;
  double epsilon = 0.1;
  double c = 1.0;
  std::string backbone_id;
};

struct SvrDiagnostics {
  long iterations = 0;
  double duality_gap = 0.0;
  double dual_objective = 0.0;
  double max_kkt_violation = 0.0;  // prediction-unit residual, see below
};

// Maximal-violating-pair SMO on the dual. Throws on non-convergence within
// max_iter, carrying the last duality gap in the message.
SvrModel fit_svr(const TrainMatrix& data, const SvrOptions& options,
                 SvrDiagnostics* diagnostics = nullptr);

double predict(const SvrModel& model, const Eigen::VectorXd& features);

// Largest per-point violation of the epsilon-SVR KKT conditions, in kg/m^2:
// in-tube points must have zero dual, interior duals must sit exactly on the
// tube boundary, and |dual| = c may only occur at or beyond the tube.
// Training rows are matched to support vectors by content; meant for the
// fixture-scale problems the test suites use.
double svr_max_kkt_violation(const SvrModel& model, const TrainMatrix& data);

}  // namespace bmi::regression
