#include "bmi/eval/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace bmi::eval {

void PredictionSet::validate() const {
  std::unordered_set<std::string> ids;
  for (const auto& row : rows) {
    if (!ids.insert(row.sample_id).second) {
      throw std::invalid_argument("prediction set: duplicate sample_id '" + row.sample_id + "'");
    }
    if (!(row.truth_bmi > 0.0)) {
      throw std::invalid_argument("prediction set: non-positive truth for '" + row.sample_id +
                                  "'");
    }
    if (!std::isfinite(row.predicted_bmi)) {
      throw std::invalid_argument("prediction set: non-finite prediction for '" +
                                  row.sample_id + "'");
    }
  }
}

double mae(const PredictionSet& preds) {
  if (preds.rows.empty()) {
    throw std::invalid_argument("mae: empty prediction set");
  }
  double total = 0.0;
  for (const auto& row : preds.rows) {
    total += std::abs(row.predicted_bmi - row.truth_bmi);
  }
  return total / static_cast<double>(preds.rows.size());
}

double pearson(const PredictionSet& preds) {
  const std::size_t n = preds.rows.size();
  if (n < 2) {
    throw std::invalid_argument("pearson: need at least two rows");
  }
  double mean_t = 0.0, mean_p = 0.0;
  for (const auto& row : preds.rows) {
    mean_t += row.truth_bmi;
    mean_p += row.predicted_bmi;
  }
  mean_t /= static_cast<double>(n);
  mean_p /= static_cast<double>(n);
  double cov = 0.0, var_t = 0.0, var_p = 0.0;
  for (const auto& row : preds.rows) {
    const double dt = row.truth_bmi - mean_t;
    const double dp = row.predicted_bmi - mean_p;
    cov += dt * dp;
    var_t += dt * dt;
    var_p += dp * dp;
  }
  if (var_t <= 0.0 || var_p <= 0.0) {
    throw std::domain_error("pearson: undefined correlation (zero variance series)");
  }
  return cov / std::sqrt(var_t * var_p);
}

}  // namespace bmi::eval
