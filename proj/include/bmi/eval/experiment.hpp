#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmi/customcnn/customcnn.hpp"
#include "bmi/eval/report.hpp"
#include "bmi/facepipe/facepipe.hpp"
#include "bmi/features/backbones.hpp"
#include "bmi/regression/model_io.hpp"

namespace bmi::eval {

// One fully resolved experiment: ingest -> enroll -> extract (cached) ->
// split -> fit -> predict -> report. Everything derives from `seed`.
struct ExperimentConfig {
  std::string manifest_path;
  std::string dataset_tag = "synthetic";

  dataset::SplitProtocol protocol;
  bool protocol_seed_set = false;  // explicit split.seed in the config file

  std::string model_id = "stub";    // backbone id or "custom_cnn"
  std::string regressor = "ridge";  // ridge | svr | cnn

  double ridge_lambda = 1.0;
  bool ridge_lambda_grid = false;  // pick lambda from {0.01,0.1,1,10,100} on a fold
  bool fit_intercept = true;
  regression::SvrOptions svr;
  customcnn::TrainConfig cnn;

  std::uint64_t seed = 0;
  std::string weights_dir;  // or "random:<seed>" for seeded backbone weights
  std::string cache_dir;
  std::string out_dir;
  std::string detector_model;
  double margin = facepipe::kDefaultCropMargin;
  bool l2_normalize = false;  // L2-normalize features before regression
  bool standardize = false;   // per-column standardization (train statistics)

  // Per-gender MAE columns. Unset -> on for every dataset except the
  // bollywood tag, whose gender annotation is too lopsided to report.
  std::optional<bool> per_gender_report;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& doc);
};

// Reads a JSON config file and applies `key.path=value` overrides.
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {});

struct ExperimentResult {
  EvaluationReport report;
  PredictionSet predictions;
  double chosen_ridge_lambda = 0.0;  // meaningful for the ridge path
  std::string predictions_csv_path;
  std::string report_json_path;
};

// Runs the full pipeline, writing ingest/FTE reports, a predictions CSV
// (sorted by sample_id), report.json, the resolved config and a status
// marker into out_dir. Stage failures propagate with the stage name and
// leave status.json flagging the partial artifacts.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Raised when no face can be found in an input (failure to enroll).
class FteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Image -> BMI composition shared by `bmi eval`-style flows, the service
// and the parity tests: detector + preprocessing + (backbone features +
// regression head | end-to-end CNN).
class Predictor {
 public:
  struct Output {
    double bmi = 0.0;
    dataset::BmiCategory category = dataset::BmiCategory::normal;
    std::string model_id;
  };

  static Predictor load(const std::string& model_path, const std::string& detector_path,
                        const std::string& weights_dir = "",
                        double margin = facepipe::kDefaultCropMargin);

  Output predict_image(const img::Image& image) const;
  const std::string& model_id() const { return model_id_; }

 private:
  Predictor() = default;

  std::string model_id_;
  double margin_ = facepipe::kDefaultCropMargin;
  std::unique_ptr<facepipe::HogFaceDetector> detector_;
  std::optional<regression::RegressionModel> head_;
  std::unique_ptr<features::Backbone> backbone_;
  // mutable: Sequential caches activations during forward; guarded per call
  mutable std::unique_ptr<customcnn::CustomCnn<float>> cnn_;
};

// Writes `sample_id,gender,truth_bmi,predicted_bmi` rows sorted by
// sample_id, with round-trip-exact doubles.
void write_predictions_csv(const PredictionSet& preds, const std::string& path);

}  // namespace bmi::eval
