#include "bmi/regression/svr.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace bmi::regression {

double kernel_eval(const SvrKernel& kernel, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& b) {
  switch (kernel.kind) {
    case KernelKind::linear:
      return a.dot(b);
    case KernelKind::rbf:
      return std::exp(-kernel.gamma * (a - b).squaredNorm());
  }
  return 0.0;
}

namespace {

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& x, const SvrKernel& kernel) {
  const Eigen::Index n = x.rows();
  if (kernel.kind == KernelKind::linear) {
    return x * x.transpose();
  }
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = std::exp(-kernel.gamma * (x.row(i) - x.row(j)).squaredNorm());
    }
  }
  return k;
}

// Multiplier window [b_lo, b_hi] implied by the current coefficients; the
// KKT conditions hold when the window is nonempty.
struct BiasWindow {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  Eigen::Index arg_lo = -1;
  Eigen::Index arg_hi = -1;

  double violation() const { return lo - hi; }
  double midpoint(double fallback = 0.0) const {
    if (std::isinf(lo) && std::isinf(hi)) return fallback;
    if (std::isinf(lo)) return hi;
    if (std::isinf(hi)) return lo;
    return 0.5 * (lo + hi);
  }
};

BiasWindow bias_window(const Eigen::VectorXd& beta, const Eigen::VectorXd& f,
                       const Eigen::VectorXd& y, double c, double epsilon) {
  BiasWindow w;
  const double bound_slack = 1e-12 * (1.0 + c);
  for (Eigen::Index i = 0; i < beta.size(); ++i) {
    const double g = f[i] - y[i];
    if (beta[i] < c - bound_slack) {
      // right derivative of the eps-term: +eps for beta >= 0, -eps below
      const double up = g + (beta[i] >= 0.0 ? epsilon : -epsilon);
      if (-up > w.lo) {
        w.lo = -up;
        w.arg_lo = i;
      }
    }
    if (beta[i] > -c + bound_slack) {
      const double dn = -(g + (beta[i] > 0.0 ? epsilon : -epsilon));
      if (dn < w.hi) {
        w.hi = dn;
        w.arg_hi = i;
      }
    }
  }
  return w;
}

double dual_objective_max_form(const Eigen::VectorXd& beta, const Eigen::VectorXd& f,
                               const Eigen::VectorXd& y, double epsilon) {
  // f = K*beta, so beta'K*beta = beta.f
  return -0.5 * beta.dot(f) + y.dot(beta) - epsilon * beta.lpNorm<1>();
}

double primal_objective(const Eigen::VectorXd& beta, const Eigen::VectorXd& f,
                        const Eigen::VectorXd& y, double b, double c, double epsilon) {
  double obj = 0.5 * beta.dot(f);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    obj += c * std::max(0.0, std::abs(f[i] + b - y[i]) - epsilon);
  }
  return obj;
}

}  // namespace

SvrModel fit_svr(const TrainMatrix& data, const SvrOptions& o, SvrDiagnostics* diag_out) {
  data.validate();
  if (data.X.rows() < 2) {
    throw std::invalid_argument("fit_svr: need at least two training rows");
  }
  if (!(o.c > 0.0)) {
    throw std::invalid_argument("fit_svr: c must be positive");
  }
  if (o.epsilon < 0.0) {
    throw std::invalid_argument("fit_svr: epsilon must be nonnegative");
  }

  const Eigen::Index n = data.X.rows();
  const Eigen::MatrixXd k = gram_matrix(data.X, o.kernel);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);  // K*beta

  const double kkt_tol = std::min(1e-4, o.tol * 0.1);
  SvrDiagnostics diag;
  BiasWindow window = bias_window(beta, f, data.y, o.c, o.epsilon);

  long iter = 0;
  while (window.violation() > kkt_tol) {
    if (iter >= o.max_iter) {
      const double b = window.midpoint();
      const double gap = primal_objective(beta, f, data.y, b, o.c, o.epsilon) -
                         dual_objective_max_form(beta, f, data.y, o.epsilon);
      throw std::runtime_error("fit_svr: no convergence within " + std::to_string(o.max_iter) +
                               " iterations, duality gap " + std::to_string(gap));
    }
    ++iter;
    const Eigen::Index i = window.arg_lo;  // wants its coefficient increased
    const Eigen::Index j = window.arg_hi;  // wants its coefficient decreased

    // Exact minimization of the piecewise-quadratic restriction along
    // beta + t*(e_i - e_j), over the box-feasible interval.
    const double lo = std::max(-o.c - beta[i], beta[j] - o.c);
    const double hi = std::min(o.c - beta[i], beta[j] + o.c);
    const double a = k(i, i) + k(j, j) - 2.0 * k(i, j);
    const double g0 = f[i] - f[j] - data.y[i] + data.y[j];

    std::vector<double> knots = {lo, hi};
    const double bi = -beta[i];  // beta_i + t crosses zero
    const double bj = beta[j];   // beta_j - t crosses zero
    if (bi > lo && bi < hi) knots.push_back(bi);
    if (bj > lo && bj < hi) knots.push_back(bj);
    std::sort(knots.begin(), knots.end());

    auto delta = [&](double t) {
      return 0.5 * a * t * t + g0 * t +
             o.epsilon * (std::abs(beta[i] + t) - std::abs(beta[i])) +
             o.epsilon * (std::abs(beta[j] - t) - std::abs(beta[j]));
    };

    double best_t = 0.0;
    double best_delta = 0.0;
    for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
      const double s0 = knots[s];
      const double s1 = knots[s + 1];
      if (s1 - s0 <= 0.0) continue;
      const double mid = 0.5 * (s0 + s1);
      const double si = beta[i] + mid >= 0.0 ? 1.0 : -1.0;
      const double sj = beta[j] - mid >= 0.0 ? 1.0 : -1.0;
      const double slope0 = g0 + o.epsilon * si - o.epsilon * sj;
      double t;
      if (a > 0.0) {
        t = std::clamp(-slope0 / a, s0, s1);
      } else {
        t = slope0 < 0.0 ? s1 : s0;
      }
      const double d = delta(t);
      if (d < best_delta) {
        best_delta = d;
        best_t = t;
      }
    }

    if (best_delta >= -1e-15) {
      // Numerical stall: the violating pair no longer yields progress.
      break;
    }
    beta[i] += best_t;
    beta[j] -= best_t;
    f += best_t * (k.col(i) - k.col(j));
    window = bias_window(beta, f, data.y, o.c, o.epsilon);

    if (iter % 1000 == 0 && window.violation() <= o.tol) {
      const double b = window.midpoint();
      const double dual = dual_objective_max_form(beta, f, data.y, o.epsilon);
      const double gap = primal_objective(beta, f, data.y, b, o.c, o.epsilon) - dual;
      if (gap <= o.tol * std::max(1.0, std::abs(dual))) break;
    }
  }

  const double b = window.midpoint();
  diag.iterations = iter;
  diag.dual_objective = dual_objective_max_form(beta, f, data.y, o.epsilon);
  diag.duality_gap =
      primal_objective(beta, f, data.y, b, o.c, o.epsilon) - diag.dual_objective;
  diag.max_kkt_violation = std::max(0.0, window.violation());

  SvrModel model;
  model.kernel = o.kernel;
  model.epsilon = o.epsilon;
  model.c = o.c;
  model.intercept = b;
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(beta[i]) > 1e-10) sv.push_back(i);
  }
  model.dual_coeffs.resize(static_cast<Eigen::Index>(sv.size()));
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), data.X.cols());
  for (std::size_t r = 0; r < sv.size(); ++r) {
    model.dual_coeffs[static_cast<Eigen::Index>(r)] = beta[sv[r]];
    model.support_vectors.row(static_cast<Eigen::Index>(r)) = data.X.row(sv[r]);
  }
  if (diag_out != nullptr) *diag_out = diag;
  return model;
}

double predict(const SvrModel& model, const Eigen::VectorXd& features) {
  if (model.support_vectors.rows() > 0 && features.size() != model.support_vectors.cols()) {
    throw std::invalid_argument("predict(svr): feature dim " + std::to_string(features.size()) +
                                " != model dim " + std::to_string(model.support_vectors.cols()));
  }
  double out = model.intercept;
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i) {
    out += model.dual_coeffs[i] *
           kernel_eval(model.kernel, model.support_vectors.row(i).transpose(), features);
  }
  return out;
}

double svr_max_kkt_violation(const SvrModel& model, const TrainMatrix& data) {
  std::vector<bool> used(static_cast<std::size_t>(model.support_vectors.rows()), false);
  const double bound_slack = 1e-9 * (1.0 + model.c);
  double worst = 0.0;
  for (Eigen::Index r = 0; r < data.X.rows(); ++r) {
    double beta = 0.0;
    for (Eigen::Index s = 0; s < model.support_vectors.rows(); ++s) {
      if (!used[static_cast<std::size_t>(s)] &&
          model.support_vectors.row(s) == data.X.row(r)) {
        beta = model.dual_coeffs[s];
        used[static_cast<std::size_t>(s)] = true;
        break;
      }
    }
    const double r_pred = predict(model, data.X.row(r).transpose()) - data.y[r];
    double violation = 0.0;
    if (std::abs(beta) <= bound_slack) {
      violation = std::max(0.0, std::abs(r_pred) - model.epsilon);
    } else if (beta > 0.0 && beta < model.c - bound_slack) {
      violation = std::abs(r_pred + model.epsilon);
    } else if (beta < 0.0 && beta > -model.c + bound_slack) {
      violation = std::abs(r_pred - model.epsilon);
    } else if (beta >= model.c - bound_slack) {
      violation = std::max(0.0, r_pred + model.epsilon);
    } else {  // beta <= -c
      violation = std::max(0.0, model.epsilon - r_pred);
    }
    worst = std::max(worst, violation);
  }
  return worst;
}

}  // namespace bmi::regression
