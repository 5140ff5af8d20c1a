#include "bmi/eval/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>

#include "bmi/common/rng.hpp"
#include "bmi/features/cache.hpp"

namespace bmi::eval {

namespace fs = std::filesystem;

namespace {

void dotted_set(nlohmann::json& doc, const std::string& key, const nlohmann::json& value) {
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << contents;
}

std::string resolve_weights_ref(const ExperimentConfig& config,
                                const features::BackboneSpec& spec) {
  if (spec.weights_ref.empty()) return "";
  if (config.weights_dir.rfind("random:", 0) == 0) return config.weights_dir;
  if (config.weights_dir.empty()) {
    throw std::runtime_error("backbone '" + spec.backbone_id +
                             "' needs features.weights_dir (a directory or 'random:<seed>')");
  }
  return (fs::path(config.weights_dir) / spec.weights_ref).string();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (manifest_path.empty()) {
    throw std::invalid_argument("config: dataset.manifest is required");
  }
  if (out_dir.empty()) {
    throw std::invalid_argument("config: output.dir is required");
  }
  if (detector_model.empty()) {
    throw std::invalid_argument("config: facepipe.detector_model is required");
  }
  if (regressor != "ridge" && regressor != "svr" && regressor != "cnn") {
    throw std::invalid_argument("config: unknown regressor '" + regressor + "'");
  }
  if (regressor == "cnn" || model_id == "custom_cnn") {
    if (regressor != "cnn" || model_id != "custom_cnn") {
      throw std::invalid_argument(
          "config: the cnn regressor pairs only with model.backbone = custom_cnn");
    }
  } else {
    features::find_backbone(model_id);  // throws on unknown id
  }
  if (protocol.train_count < 0 || protocol.test_count < 0) {
    throw std::invalid_argument("config: split counts must be nonnegative");
  }
  if (margin < 0.0 || margin > 1.0) {
    throw std::invalid_argument("config: facepipe.margin must be in [0, 1]");
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json doc;
  doc["dataset"] = {{"manifest", manifest_path}, {"tag", dataset_tag}};
  doc["split"] = {{"name", protocol.name},
                  {"train_count", protocol.train_count},
                  {"test_count", protocol.test_count},
                  {"gender_balanced_test", protocol.gender_balanced_test}};
  if (protocol_seed_set) doc["split"]["seed"] = protocol.seed;
  doc["model"] = {
      {"backbone", model_id},
      {"regressor", regressor},
      {"ridge",
       {{"lambda", ridge_lambda}, {"grid", ridge_lambda_grid}, {"fit_intercept", fit_intercept}}},
      {"svr",
       {{"c", svr.c},
        {"epsilon", svr.epsilon},
        {"kernel", svr.kernel.kind == regression::KernelKind::linear ? "linear" : "rbf"},
        {"gamma", svr.kernel.gamma}}},
      {"cnn",
       {{"learning_rate", cnn.learning_rate},
        {"epochs", cnn.epochs},
        {"batch_size", cnn.batch_size},
        {"validation_fraction", cnn.validation_fraction}}}};
  doc["seed"] = seed;
  doc["facepipe"] = {{"detector_model", detector_model}, {"margin", margin}};
  doc["features"] = {{"weights_dir", weights_dir},
                     {"cache_dir", cache_dir},
                     {"l2_normalize", l2_normalize},
                     {"standardize", standardize}};
  doc["output"] = {{"dir", out_dir}};
  if (per_gender_report) doc["report"] = {{"per_gender", *per_gender_report}};
  return doc;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
  ExperimentConfig c;
  const auto ds = doc.value("dataset", nlohmann::json::object());
  c.manifest_path = ds.value("manifest", "");
  c.dataset_tag = ds.value("tag", "synthetic");

  const auto split = doc.value("split", nlohmann::json::object());
  c.protocol.name = split.value("name", "default");
  c.protocol.train_count = split.value("train_count", 0);
  c.protocol.test_count = split.value("test_count", 0);
  c.protocol.gender_balanced_test = split.value("gender_balanced_test", false);
  if (split.contains("seed") && !split.at("seed").is_null()) {
    c.protocol.seed = split.at("seed").get<std::uint64_t>();
    c.protocol_seed_set = true;
  }

  const auto model = doc.value("model", nlohmann::json::object());
  c.model_id = model.value("backbone", "stub");
  c.regressor = model.value("regressor", "ridge");
  const auto ridge = model.value("ridge", nlohmann::json::object());
  c.ridge_lambda = ridge.value("lambda", 1.0);
  c.ridge_lambda_grid = ridge.value("grid", false);
  c.fit_intercept = ridge.value("fit_intercept", true);
  const auto svr = model.value("svr", nlohmann::json::object());
  c.svr.c = svr.value("c", 1.0);
  c.svr.epsilon = svr.value("epsilon", 0.1);
  c.svr.kernel.kind = svr.value("kernel", "linear") == std::string("rbf")
                          ? regression::KernelKind::rbf
                          : regression::KernelKind::linear;
  c.svr.kernel.gamma = svr.value("gamma", 1.0);
  const auto cnn = model.value("cnn", nlohmann::json::object());
  c.cnn.learning_rate = cnn.value("learning_rate", 0.001);
  c.cnn.epochs = cnn.value("epochs", 150);
  c.cnn.batch_size = cnn.value("batch_size", 32);
  c.cnn.validation_fraction = cnn.value("validation_fraction", 0.10);

  c.seed = doc.value("seed", 0ull);
  const auto fp = doc.value("facepipe", nlohmann::json::object());
  c.detector_model = fp.value("detector_model", "");
  c.margin = fp.value("margin", facepipe::kDefaultCropMargin);
  const auto feats = doc.value("features", nlohmann::json::object());
  c.weights_dir = feats.value("weights_dir", "");
  c.cache_dir = feats.value("cache_dir", "");
  c.l2_normalize = feats.value("l2_normalize", false);
  c.standardize = feats.value("standardize", false);
  const auto output = doc.value("output", nlohmann::json::object());
  c.out_dir = output.value("dir", "");
  const auto report = doc.value("report", nlohmann::json::object());
  if (report.contains("per_gender") && !report.at("per_gender").is_null()) {
    c.per_gender_report = report.at("per_gender").get<bool>();
  }
  return c;
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("config: cannot open " + path);
  }
  nlohmann::json doc = nlohmann::json::parse(in);
  for (const auto& kv : overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config override '" + kv + "' is not key=value");
    }
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
      value = raw;  // plain string
    }
    dotted_set(doc, key, value);
  }
  return ExperimentConfig::from_json(doc);
}

void write_predictions_csv(const PredictionSet& preds, const std::string& path) {
  PredictionSet sorted = preds;
  std::sort(sorted.rows.begin(), sorted.rows.end(),
            [](const PredictionRow& a, const PredictionRow& b) {
              return a.sample_id < b.sample_id;
            });
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << "sample_id,gender,truth_bmi,predicted_bmi\n";
  char buf[64];
  for (const auto& row : sorted.rows) {
    out << row.sample_id << "," << dataset::to_string(row.gender) << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", row.truth_bmi);
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", row.predicted_bmi);
    out << buf << "\n";
  }
}

namespace {

struct FeatureTable {
  std::map<std::string, Eigen::VectorXf> by_id;
};

// Cache-first extraction for every enrolled crop.
FeatureTable extract_all(const ExperimentConfig& config,
                         const facepipe::EnrollmentResult& enrollment) {
  const features::BackboneSpec& spec = features::find_backbone(config.model_id);
  features::FeatureCache cache(config.cache_dir.empty()
                                   ? (fs::path(config.out_dir) / "cache").string()
                                   : config.cache_dir,
                               spec.backbone_id);
  std::unique_ptr<features::Backbone> backbone;
  FeatureTable table;
  for (const auto& crop : enrollment.crops) {
    if (auto hit = cache.get(crop.source_sample_id)) {
      table.by_id[crop.source_sample_id] = std::move(hit->values);
      continue;
    }
    if (!backbone) {
      backbone = features::make_backbone(spec.backbone_id, resolve_weights_ref(config, spec));
    }
    const auto tensor = facepipe::preprocess(crop, spec.input_h, spec.input_w, spec.norm);
    features::FeatureVector fv = features::extract_features(tensor, *backbone);
    cache.put(crop.source_sample_id, fv);
    table.by_id[crop.source_sample_id] = std::move(fv.values);
  }
  return table;
}

Eigen::VectorXd feature_row(const FeatureTable& table, const std::string& id,
                            bool l2_normalize) {
  const auto it = table.by_id.find(id);
  if (it == table.by_id.end()) {
    throw std::runtime_error("missing features for sample '" + id + "'");
  }
  Eigen::VectorXd v = it->second.cast<double>();
  if (l2_normalize) {
    const double n = v.norm();
    if (n > 0) v /= n;
  }
  return v;
}

regression::TrainMatrix assemble_matrix(const FeatureTable& table,
                                        const std::vector<dataset::FaceSample>& samples,
                                        bool l2_normalize) {
  regression::TrainMatrix data;
  if (samples.empty()) {
    return data;
  }
  const Eigen::VectorXd first = feature_row(table, samples[0].sample_id, l2_normalize);
  data.X.resize(static_cast<Eigen::Index>(samples.size()), first.size());
  data.y.resize(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    data.X.row(static_cast<Eigen::Index>(i)) =
        feature_row(table, samples[i].sample_id, l2_normalize).transpose();
    data.y[static_cast<Eigen::Index>(i)] = samples[i].bmi;
  }
  return data;
}

// Per-column standardization fitted on train, applied to both.
void standardize_columns(regression::TrainMatrix& train, regression::TrainMatrix& test) {
  for (Eigen::Index c = 0; c < train.X.cols(); ++c) {
    const double mean = train.X.col(c).mean();
    double stddev = std::sqrt((train.X.col(c).array() - mean).square().mean());
    if (stddev < 1e-12) stddev = 1.0;
    train.X.col(c) = (train.X.col(c).array() - mean) / stddev;
    if (test.X.rows() > 0) {
      test.X.col(c) = (test.X.col(c).array() - mean) / stddev;
    }
  }
}

double ridge_grid_search(const regression::TrainMatrix& train, bool fit_intercept,
                         std::uint64_t seed, nlohmann::json* log) {
  static constexpr double kGrid[] = {0.01, 0.1, 1.0, 10.0, 100.0};
  const Eigen::Index n = train.X.rows();
  Eigen::Index val_n = std::max<Eigen::Index>(1, n / 10);
  if (n - val_n < 2) {
    return 1.0;  // too small to hold out a fold, keep the default
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 gen(seed);
  shuffle_indices(order, gen);

  regression::TrainMatrix fit_part, val_part;
  fit_part.X.resize(n - val_n, train.X.cols());
  fit_part.y.resize(n - val_n);
  val_part.X.resize(val_n, train.X.cols());
  val_part.y.resize(val_n);
  for (Eigen::Index i = 0; i < val_n; ++i) {
    val_part.X.row(i) = train.X.row(order[static_cast<std::size_t>(i)]);
    val_part.y[i] = train.y[order[static_cast<std::size_t>(i)]];
  }
  for (Eigen::Index i = val_n; i < n; ++i) {
    fit_part.X.row(i - val_n) = train.X.row(order[static_cast<std::size_t>(i)]);
    fit_part.y[i - val_n] = train.y[order[static_cast<std::size_t>(i)]];
  }

  double best_lambda = 1.0;
  double best_mae = std::numeric_limits<double>::infinity();
  for (double lambda : kGrid) {
    const auto model = regression::fit_ridge(fit_part, lambda, fit_intercept);
    double total = 0.0;
    for (Eigen::Index i = 0; i < val_n; ++i) {
      total += std::abs(regression::predict(model, val_part.X.row(i).transpose()) -
                        val_part.y[i]);
    }
    const double fold_mae = total / static_cast<double>(val_n);
    if (log) (*log)[std::to_string(lambda)] = fold_mae;
    if (fold_mae < best_mae) {
      best_mae = fold_mae;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  // Config errors must surface before any artifact is produced.
  config.validate();

  fs::create_directories(config.out_dir);
  const auto out = [&](const char* name) { return (fs::path(config.out_dir) / name).string(); };

  std::string current_stage = "setup";
  auto fail = [&](const std::exception& e) {
    nlohmann::json status = {{"status", "failed"},
                             {"stage", current_stage},
                             {"message", e.what()},
                             {"partial_artifacts", true}};
    write_text_file(out("status.json"), status.dump(2));
  };

  try {
    current_stage = "ingest";
    const dataset::IngestResult ingest = dataset::load_manifest(config.manifest_path);
    write_text_file(out("ingest_report.json"), dataset::ingest_report(ingest).dump(2));

    current_stage = "enroll";
    const auto detector_model = facepipe::DetectorModel::load(config.detector_model);
    const facepipe::HogFaceDetector detector(detector_model);
    const facepipe::EnrollmentResult enrollment =
        facepipe::enroll(ingest.samples, detector, config.margin);
    write_text_file(out("fte_report.json"), facepipe::fte_report(enrollment).dump(2));

    // FTE and unreadable samples are excluded from every downstream stage.
    std::map<std::string, const facepipe::FaceCrop*> crop_by_id;
    for (const auto& crop : enrollment.crops) crop_by_id[crop.source_sample_id] = &crop;
    std::vector<dataset::FaceSample> enrolled;
    for (const auto& sample : ingest.samples) {
      if (crop_by_id.count(sample.sample_id)) enrolled.push_back(sample);
    }

    current_stage = "split";
    dataset::SplitProtocol protocol = config.protocol;
    if (!config.protocol_seed_set) {
      protocol.seed = derive_seed(config.seed, "split");
    }
    const dataset::SplitResult split = dataset::apply_split(enrolled, protocol);

    PredictionSet preds;
    preds.dataset_tag = config.dataset_tag;
    preds.model_id = config.model_id;
    preds.regressor = config.regressor;
    double chosen_lambda = config.ridge_lambda;
    nlohmann::json fit_log = nlohmann::json::object();

    if (config.regressor == "cnn") {
      current_stage = "fit";
      auto cnn = customcnn::build_custom_cnn<float>(customcnn::CustomCnnSpec::standard(),
                                                    derive_seed(config.seed, "cnn.init"));
      std::vector<customcnn::LabelledImage<float>> train_data;
      for (const auto& sample : split.train) {
        train_data.push_back({facepipe::preprocess(*crop_by_id.at(sample.sample_id), 224, 224,
                                                   facepipe::NormSpec::unit()),
                              static_cast<float>(sample.bmi)});
      }
      customcnn::TrainConfig tc = config.cnn;
      tc.seed = derive_seed(config.seed, "cnn");
      const auto history = customcnn::train_custom_cnn(cnn, train_data, tc);
      customcnn::write_history_csv(history, out("loss_history.csv"));
      customcnn::save_checkpoint(cnn, out("model.bmimodel"));

      current_stage = "predict";
      for (const auto& sample : split.test) {
        const auto tensor = facepipe::preprocess(*crop_by_id.at(sample.sample_id), 224, 224,
                                                 facepipe::NormSpec::unit());
        preds.rows.push_back({sample.sample_id, sample.gender, sample.bmi,
                              static_cast<double>(customcnn::predict_cnn(cnn, tensor))});
      }
    } else {
      current_stage = "extract";
      const FeatureTable table = extract_all(config, enrollment);

      current_stage = "fit";
      regression::TrainMatrix train =
          assemble_matrix(table, split.train, config.l2_normalize);
      regression::TrainMatrix test = assemble_matrix(table, split.test, config.l2_normalize);
      if (config.standardize) {
        standardize_columns(train, test);
      }
      std::optional<regression::RegressionModel> head;
      if (config.regressor == "ridge") {
        if (config.ridge_lambda_grid) {
          chosen_lambda = ridge_grid_search(train, config.fit_intercept,
                                            derive_seed(config.seed, "ridge.val"), &fit_log);
        }
        auto model = regression::fit_ridge(train, chosen_lambda, config.fit_intercept);
        model.backbone_id = config.model_id;
        regression::save_model(model, out("model.bmimodel"));
        head = std::move(model);
      } else {
        auto model = regression::fit_svr(train, config.svr);
        model.backbone_id = config.model_id;
        regression::save_model(model, out("model.bmimodel"));
        head = std::move(model);
      }

      current_stage = "predict";
      for (std::size_t i = 0; i < split.test.size(); ++i) {
        const auto& sample = split.test[i];
        const double bmi =
            regression::predict(*head, test.X.row(static_cast<Eigen::Index>(i)).transpose());
        preds.rows.push_back({sample.sample_id, sample.gender, sample.bmi, bmi});
      }
    }

    current_stage = "report";
    const int fte_count = static_cast<int>(enrollment.fte_ids.size());
    ExperimentResult result;
    result.report = grouped_report(preds, fte_count);
    if (!config.per_gender_report.value_or(config.dataset_tag != "bollywood")) {
      result.report.mae_male.reset();
      result.report.mae_female.reset();
    }
    result.predictions = preds;
    result.chosen_ridge_lambda = chosen_lambda;
    result.predictions_csv_path = out("predictions.csv");
    result.report_json_path = out("report.json");
    write_predictions_csv(preds, result.predictions_csv_path);

    nlohmann::json report_doc = result.report.to_json();
    report_doc["io_error_count"] = enrollment.io_error_ids.size();
    if (config.regressor == "ridge") {
      report_doc["ridge_lambda"] = chosen_lambda;
      if (!fit_log.empty()) report_doc["ridge_lambda_grid"] = fit_log;
    }
    write_text_file(result.report_json_path, report_doc.dump(2));

    nlohmann::json resolved = config.to_json();
    resolved["split"]["seed"] = protocol.seed;
    if (config.regressor == "ridge") resolved["model"]["ridge"]["lambda"] = chosen_lambda;
    write_text_file(out("resolved_config.json"), resolved.dump(2));
    write_text_file(out("status.json"), nlohmann::json{{"status", "ok"}}.dump(2));
    return result;
  } catch (const std::exception& e) {
    fail(e);
    throw std::runtime_error("stage '" + current_stage + "': " + e.what());
  }
}

Predictor Predictor::load(const std::string& model_path, const std::string& detector_path,
                          const std::string& weights_dir, double margin) {
  Predictor p;
  p.margin_ = margin;
  p.detector_ = std::make_unique<facepipe::HogFaceDetector>(
      facepipe::DetectorModel::load(detector_path));
  const std::string type = regression::model_type(model_path);
  if (type == "custom_cnn") {
    p.cnn_ = std::make_unique<customcnn::CustomCnn<float>>(
        customcnn::load_checkpoint<float>(model_path));
    p.model_id_ = "custom_cnn";
  } else {
    p.head_ = regression::load_regression_model(model_path);
    const std::string backbone_id = regression::model_backbone_id(*p.head_);
    const features::BackboneSpec& spec = features::find_backbone(backbone_id);
    std::string ref = spec.weights_ref;
    if (!ref.empty()) {
      if (weights_dir.rfind("random:", 0) == 0) {
        ref = weights_dir;
      } else if (!weights_dir.empty()) {
        ref = (fs::path(weights_dir) / ref).string();
      } else {
        throw std::runtime_error("Predictor: backbone '" + backbone_id +
                                 "' needs a weights dir");
      }
    }
    p.backbone_ = features::make_backbone(backbone_id, ref);
    p.model_id_ = type + "+" + backbone_id;
  }
  return p;
}

Predictor::Output Predictor::predict_image(const img::Image& image) const {
  const auto crop = facepipe::detect_face(image, *detector_, margin_);
  if (!crop) {
    throw FteError("no face found in the input image");
  }
  double bmi = 0.0;
  if (cnn_) {
    static std::mutex cnn_mutex;  // Sequential::forward caches activations
    std::lock_guard<std::mutex> lock(cnn_mutex);
    const auto tensor = facepipe::preprocess(*crop, 224, 224, facepipe::NormSpec::unit());
    bmi = static_cast<double>(customcnn::predict_cnn(*cnn_, tensor));
  } else {
    const features::BackboneSpec& spec = backbone_->spec();
    const auto tensor = facepipe::preprocess(*crop, spec.input_h, spec.input_w, spec.norm);
    const features::FeatureVector fv = features::extract_features(tensor, *backbone_);
    bmi = regression::predict(*head_, fv.values.cast<double>());
  }
  if (!(bmi > 0.0) || !std::isfinite(bmi)) {
    throw std::runtime_error("model produced a non-physical BMI of " + std::to_string(bmi));
  }
  return Output{bmi, dataset::categorize_bmi(bmi), model_id_};
}

}  // namespace bmi::eval
