#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmi/eval/metrics.hpp"

namespace bmi::eval {

struct EvaluationReport {
  std::string dataset_tag;
  std::string model_id;
  std::string regressor;

  double mae_overall = 0.0;
  std::optional<double> mae_male;    // absent when the subset is empty
  std::optional<double> mae_female;
  int n_overall = 0;
  int n_male = 0;
  int n_female = 0;
  int fte_count = 0;
  std::optional<double> pearson_overall;  // absent when undefined

  nlohmann::json to_json() const;
  static EvaluationReport from_json(const nlohmann::json& doc);
};

// Overall MAE over every row, per-gender MAE over the gender subsets
// (absent for empty subsets), Pearson when defined.
EvaluationReport grouped_report(const PredictionSet& preds, int fte_count);

// Comparison tables: one row per model, column groups {Overall, Male,
// Female} x regressor kinds present, two-decimal cells. A column group is
// dropped when no report carries it and rendered "N/A" when only some do;
// text and CSV always agree.
struct TableOutput {
  std::string text;
  std::string csv;
};

TableOutput emit_tables(const std::vector<EvaluationReport>& reports);

}  // namespace bmi::eval
