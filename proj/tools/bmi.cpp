// Command-line front end for the BMI-from-face toolkit:
//   bmi ingest | enroll | extract | train | eval | report | run

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bmi/customcnn/customcnn.hpp"
#include "bmi/dataset/dataset.hpp"
#include "bmi/eval/experiment.hpp"
#include "bmi/eval/report.hpp"
#include "bmi/facepipe/facepipe.hpp"
#include "bmi/features/cache.hpp"
#include "bmi/regression/model_io.hpp"

namespace fs = std::filesystem;

namespace {

struct SplitFlags {
  int train_count = 0;
  int test_count = 0;
  bool balanced = false;
  std::uint64_t seed = 0;

  bmi::dataset::SplitProtocol protocol() const {
    return {"cli", train_count, test_count, balanced, seed};
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--train-count", train_count, "training rows to draw")->required();
    cmd->add_option("--test-count", test_count, "test rows to draw")->required();
    cmd->add_flag("--balanced", balanced, "gender-balanced test draw");
    cmd->add_option("--seed", seed, "split seed");
  }
};

void write_json(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << "\n";
}

// Samples that enrolled (have a crop on disk), manifest order.
std::vector<bmi::dataset::FaceSample> enrolled_samples(
    const std::vector<bmi::dataset::FaceSample>& samples, const std::string& crops_dir) {
  std::vector<bmi::dataset::FaceSample> out;
  for (const auto& s : samples) {
    if (fs::exists(fs::path(crops_dir) / (s.sample_id + ".ppm"))) out.push_back(s);
  }
  return out;
}

Eigen::VectorXd cached_features(bmi::features::FeatureCache& cache, const std::string& id) {
  auto hit = cache.get(id);
  if (!hit) {
    throw std::runtime_error("no cached features for sample '" + id +
                             "'; run `bmi extract` first");
  }
  return hit->values.cast<double>();
}

bmi::regression::TrainMatrix matrix_from_cache(
    bmi::features::FeatureCache& cache, const std::vector<bmi::dataset::FaceSample>& samples) {
  bmi::regression::TrainMatrix data;
  if (samples.empty()) return data;
  const Eigen::VectorXd first = cached_features(cache, samples[0].sample_id);
  data.X.resize(static_cast<Eigen::Index>(samples.size()), first.size());
  data.y.resize(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    data.X.row(static_cast<Eigen::Index>(i)) =
        cached_features(cache, samples[i].sample_id).transpose();
    data.y[static_cast<Eigen::Index>(i)] = samples[i].bmi;
  }
  return data;
}

int cmd_ingest(const std::string& manifest, const std::string& report_path) {
  const auto result = bmi::dataset::load_manifest(manifest);
  const auto summary = bmi::dataset::dataset_summary(result.samples);
  std::cout << "accepted " << result.samples.size() << " samples, rejected "
            << result.rejected.size() << " rows\n";
  std::cout << bmi::dataset::summary_json(summary).dump(2) << "\n";
  if (!report_path.empty()) {
    write_json(report_path, bmi::dataset::ingest_report(result));
  }
  return 0;
}

int cmd_enroll(const std::string& manifest, const std::string& detector_path, double margin,
               const std::string& crops_dir, const std::string& fte_report_path) {
  const auto ingest = bmi::dataset::load_manifest(manifest);
  const bmi::facepipe::HogFaceDetector detector =
      bmi::facepipe::HogFaceDetector::from_file(detector_path);
  const auto result = bmi::facepipe::enroll(ingest.samples, detector, margin);
  fs::create_directories(crops_dir);
  for (const auto& crop : result.crops) {
    bmi::img::save_ppm((fs::path(crops_dir) / (crop.source_sample_id + ".ppm")).string(),
                       crop.pixels);
  }
  if (!fte_report_path.empty()) {
    write_json(fte_report_path, bmi::facepipe::fte_report(result));
  }
  std::cout << "enrolled " << result.crops.size() << ", fte " << result.fte_ids.size()
            << ", io errors " << result.io_error_ids.size() << "\n";
  return 0;
}

int cmd_extract(const std::string& backbone_id, const std::string& crops_dir,
                const std::string& cache_dir, const std::string& weights) {
  const auto& spec = bmi::features::find_backbone(backbone_id);
  std::string ref = spec.weights_ref;
  if (!ref.empty()) {
    if (weights.rfind("random:", 0) == 0) {
      ref = weights;
    } else if (!weights.empty()) {
      ref = (fs::path(weights) / ref).string();
    } else {
      throw std::runtime_error("backbone '" + backbone_id + "' needs --weights-dir");
    }
  }
  const auto backbone = bmi::features::make_backbone(backbone_id, ref);
  bmi::features::FeatureCache cache(cache_dir, backbone_id);

  std::vector<fs::path> crops;
  for (const auto& entry : fs::directory_iterator(crops_dir)) {
    if (entry.path().extension() == ".ppm") crops.push_back(entry.path());
  }
  std::sort(crops.begin(), crops.end());
  int fresh = 0;
  for (const auto& path : crops) {
    const std::string id = path.stem().string();
    if (cache.get(id)) continue;
    const auto image = bmi::img::load_image(path.string());
    const auto tensor = bmi::facepipe::preprocess(image, spec.input_h, spec.input_w, spec.norm);
    cache.put(id, bmi::features::extract_features(tensor, *backbone));
    ++fresh;
  }
  std::cout << "cache '" << cache_dir << "' now holds " << cache.size() << " vectors ("
            << fresh << " new)\n";
  return 0;
}

int cmd_train(const std::string& regressor, const std::string& backbone_id,
              const std::string& manifest, const std::string& cache_dir,
              const std::string& crops_dir, const SplitFlags& split_flags, double lambda,
              bool lambda_grid, double svr_c, double svr_epsilon, const std::string& kernel,
              double gamma, int epochs, double lr, int batch, const std::string& out_path) {
  const auto ingest = bmi::dataset::load_manifest(manifest);
  auto samples = ingest.samples;
  if (!crops_dir.empty()) samples = enrolled_samples(samples, crops_dir);
  const auto split = bmi::dataset::apply_split(samples, split_flags.protocol());

  if (regressor == "cnn") {
    if (crops_dir.empty()) throw std::runtime_error("cnn training needs --crops");
    auto model = bmi::customcnn::build_custom_cnn<float>(
        bmi::customcnn::CustomCnnSpec::standard(), split_flags.seed);
    std::vector<bmi::customcnn::LabelledImage<float>> data;
    for (const auto& s : split.train) {
      const auto image =
          bmi::img::load_image((fs::path(crops_dir) / (s.sample_id + ".ppm")).string());
      data.push_back({bmi::facepipe::preprocess(image, 224, 224, bmi::facepipe::NormSpec::unit()),
                      static_cast<float>(s.bmi)});
    }
    bmi::customcnn::TrainConfig config;
    config.epochs = epochs;
    config.learning_rate = lr;
    config.batch_size = batch;
    config.seed = split_flags.seed;
    const auto history = bmi::customcnn::train_custom_cnn(model, data, config);
    bmi::customcnn::write_history_csv(history, out_path + ".history.csv");
    bmi::customcnn::save_checkpoint(model, out_path);
    std::cout << "trained custom cnn for " << history.size() << " epochs -> " << out_path
              << "\n";
    return 0;
  }

  bmi::features::FeatureCache cache(cache_dir, backbone_id);
  const auto train = matrix_from_cache(cache, split.train);
  if (regressor == "ridge") {
    auto model = bmi::regression::fit_ridge(train, lambda, true);
    if (lambda_grid) {
      std::cerr << "note: --lambda-grid is handled by `bmi run`; using --lambda here\n";
    }
    model.backbone_id = backbone_id;
    bmi::regression::save_model(model, out_path);
  } else if (regressor == "svr") {
    bmi::regression::SvrOptions options;
    options.c = svr_c;
    options.epsilon = svr_epsilon;
    options.kernel.kind = kernel == "rbf" ? bmi::regression::KernelKind::rbf
                                          : bmi::regression::KernelKind::linear;
    options.kernel.gamma = gamma;
    auto model = bmi::regression::fit_svr(train, options);
    model.backbone_id = backbone_id;
    bmi::regression::save_model(model, out_path);
  } else {
    throw std::runtime_error("unknown regressor '" + regressor + "'");
  }
  std::cout << "trained " << regressor << " on " << train.X.rows() << " rows -> " << out_path
            << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& manifest,
             const std::string& cache_dir, const std::string& crops_dir,
             const SplitFlags& split_flags, const std::string& fte_report_path,
             const std::string& out_dir) {
  const auto ingest = bmi::dataset::load_manifest(manifest);
  auto samples = ingest.samples;
  if (!crops_dir.empty()) samples = enrolled_samples(samples, crops_dir);
  const auto split = bmi::dataset::apply_split(samples, split_flags.protocol());

  int fte_count = 0;
  if (!fte_report_path.empty()) {
    std::ifstream in(fte_report_path);
    if (!in) throw std::runtime_error("cannot read " + fte_report_path);
    fte_count = static_cast<int>(nlohmann::json::parse(in).at("fte").size());
  }

  bmi::eval::PredictionSet preds;
  preds.dataset_tag =
      split.test.empty() ? "synthetic" : bmi::dataset::to_string(split.test[0].dataset_tag);

  const std::string type = bmi::regression::model_type(model_path);
  if (type == "custom_cnn") {
    if (crops_dir.empty()) throw std::runtime_error("cnn eval needs --crops");
    auto model = bmi::customcnn::load_checkpoint<float>(model_path);
    preds.model_id = "custom_cnn";
    preds.regressor = "cnn";
    for (const auto& s : split.test) {
      const auto image =
          bmi::img::load_image((fs::path(crops_dir) / (s.sample_id + ".ppm")).string());
      const auto tensor =
          bmi::facepipe::preprocess(image, 224, 224, bmi::facepipe::NormSpec::unit());
      preds.rows.push_back({s.sample_id, s.gender, s.bmi,
                            static_cast<double>(bmi::customcnn::predict_cnn(model, tensor))});
    }
  } else {
    const auto model = bmi::regression::load_regression_model(model_path);
    preds.model_id = bmi::regression::model_backbone_id(model);
    preds.regressor = type;
    bmi::features::FeatureCache cache(cache_dir, preds.model_id);
    for (const auto& s : split.test) {
      preds.rows.push_back({s.sample_id, s.gender, s.bmi,
                            bmi::regression::predict(model, cached_features(cache, s.sample_id))});
    }
  }

  fs::create_directories(out_dir);
  const auto report = bmi::eval::grouped_report(preds, fte_count);
  bmi::eval::write_predictions_csv(preds, (fs::path(out_dir) / "predictions.csv").string());
  write_json((fs::path(out_dir) / "report.json").string(), report.to_json());
  std::cout << report.to_json().dump(2) << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_prefix) {
  std::vector<bmi::eval::EvaluationReport> reports;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    reports.push_back(bmi::eval::EvaluationReport::from_json(nlohmann::json::parse(in)));
  }
  const auto tables = bmi::eval::emit_tables(reports);
  std::cout << tables.text;
  if (!out_prefix.empty()) {
    std::ofstream text(out_prefix + ".txt", std::ios::trunc);
    text << tables.text;
    std::ofstream csv(out_prefix + ".csv", std::ios::trunc);
    csv << tables.csv;
  }
  return 0;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides) {
  const auto config = bmi::eval::load_config(config_path, overrides);
  const auto result = bmi::eval::run_experiment(config);
  std::cout << result.report.to_json().dump(2) << "\n";
  std::cout << "predictions: " << result.predictions_csv_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BMI-from-face inference and benchmarking toolkit"};
  app.require_subcommand(1);

  // ingest
  std::string manifest, report_path;
  auto* ingest = app.add_subcommand("ingest", "validate a manifest and report rejected rows");
  ingest->add_option("manifest", manifest, "manifest CSV")->required();
  ingest->add_option("--report", report_path, "write the ingest report JSON here");

  // enroll
  std::string detector_path, crops_dir, fte_report_path;
  double margin = bmi::facepipe::kDefaultCropMargin;
  auto* enroll = app.add_subcommand("enroll", "detect and crop faces, tracking FTE");
  enroll->add_option("--manifest", manifest, "manifest CSV")->required();
  enroll->add_option("--detector", detector_path, "HOG detector model")->required();
  enroll->add_option("--margin", margin, "crop margin fraction");
  enroll->add_option("--out-crops", crops_dir, "directory for cropped faces")->required();
  enroll->add_option("--fte-report", fte_report_path, "write the FTE report JSON here");

  // extract
  std::string backbone_id = "stub", cache_dir = "cache", weights_dir;
  auto* extract = app.add_subcommand("extract", "compute deep features into the cache");
  extract->add_option("--backbone", backbone_id, "backbone id")->required();
  extract->add_option("--crops", crops_dir, "directory of cropped faces")->required();
  extract->add_option("--cache-dir", cache_dir, "feature cache directory")->required();
  extract->add_option("--weights-dir", weights_dir, "weight archives dir or random:<seed>");

  // train
  std::string regressor = "ridge", out_path = "model.bmimodel", kernel = "linear";
  double lambda = 1.0, svr_c = 1.0, svr_epsilon = 0.1, gamma = 1.0, lr = 0.001;
  bool lambda_grid = false;
  int epochs = 150, batch = 32;
  SplitFlags train_split;
  auto* train = app.add_subcommand("train", "fit a regression head or the end-to-end CNN");
  train->add_option("--regressor", regressor, "ridge | svr | cnn")->required();
  train->add_option("--backbone", backbone_id, "backbone id (feature heads)");
  train->add_option("--manifest", manifest, "manifest CSV")->required();
  train->add_option("--cache-dir", cache_dir, "feature cache directory");
  train->add_option("--crops", crops_dir, "crops dir (cnn path, or to honor enrollment)");
  train_split.attach(train);
  train->add_option("--lambda", lambda, "ridge penalty");
  train->add_flag("--lambda-grid", lambda_grid, "note: grid selection lives in `bmi run`");
  train->add_option("--svr-c", svr_c, "svr box constraint");
  train->add_option("--svr-epsilon", svr_epsilon, "svr tube half-width");
  train->add_option("--kernel", kernel, "linear | rbf");
  train->add_option("--gamma", gamma, "rbf gamma");
  train->add_option("--epochs", epochs, "cnn epochs");
  train->add_option("--lr", lr, "cnn learning rate");
  train->add_option("--batch", batch, "cnn batch size");
  train->add_option("--out", out_path, "output .bmimodel path")->required();

  // eval
  std::string model_path, out_dir = "eval_out";
  SplitFlags eval_split;
  auto* eval = app.add_subcommand("eval", "evaluate a model on the test split");
  eval->add_option("--model", model_path, ".bmimodel path")->required();
  eval->add_option("--manifest", manifest, "manifest CSV")->required();
  eval->add_option("--cache-dir", cache_dir, "feature cache directory");
  eval->add_option("--crops", crops_dir, "crops dir (cnn path, or to honor enrollment)");
  eval_split.attach(eval);
  eval->add_option("--fte-report", fte_report_path, "enrollment report for the FTE count");
  eval->add_option("--out-dir", out_dir, "directory for predictions.csv and report.json");

  // report
  std::vector<std::string> report_inputs;
  std::string out_prefix;
  auto* report = app.add_subcommand("report", "emit comparison tables from report JSONs");
  report->add_option("--inputs", report_inputs, "report.json files")->required();
  report->add_option("--out-prefix", out_prefix, "write <prefix>.txt and <prefix>.csv");

  // run
  std::string config_path;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "run a full experiment from a config file");
  run->add_option("config", config_path, "experiment config JSON")->required();
  run->add_option("--set", overrides, "override config keys, e.g. --set seed=7");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(manifest, report_path);
    if (*enroll) return cmd_enroll(manifest, detector_path, margin, crops_dir, fte_report_path);
    if (*extract) return cmd_extract(backbone_id, crops_dir, cache_dir, weights_dir);
    if (*train) {
      return cmd_train(regressor, backbone_id, manifest, cache_dir, crops_dir, train_split,
                       lambda, lambda_grid, svr_c, svr_epsilon, kernel, gamma, epochs, lr,
                       batch, out_path);
    }
    if (*eval) {
      return cmd_eval(model_path, manifest, cache_dir, crops_dir, eval_split, fte_report_path,
                      out_dir);
    }
    if (*report) return cmd_report(report_inputs, out_prefix);
    if (*run) return cmd_run(config_path, overrides);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
