#pragma once

#include <string>
#include <vector>

#include "bmi/dataset/dataset.hpp"

namespace bmi::eval {

struct PredictionRow {
  std::string sample_id;
  dataset::Gender gender = dataset::Gender::unknown;
  double truth_bmi = 0.0;
  double predicted_bmi = 0.0;
};

struct PredictionSet {
  std::vector<PredictionRow> rows;
  std::string dataset_tag;
  std::string model_id;   // backbone id or "custom_cnn"
  std::string regressor;  // "ridge", "svr" or "cnn"

  void validate() const;  // unique ids, positive truths, finite predictions
};

// Mean absolute error sum(|pred_i - truth_i|)/n; throws on an empty set.
double mae(const PredictionSet& preds);

// Sample Pearson correlation between predictions and truths; requires
// n >= 2 and nonzero variance in both series.
double pearson(const PredictionSet& preds);

}  // namespace bmi::eval
