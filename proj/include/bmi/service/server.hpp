#pragma once

#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "bmi/eval/experiment.hpp"
#include "bmi/service/store.hpp"

namespace httplib {
class Server;
}

namespace bmi::service {

struct ServiceOptions {
  std::string model_path;     // .bmimodel; empty -> every predict answers NO_MODEL
  std::string detector_path;  // HOG detector asset
  std::string weights_dir;    // for backbones that need weight archives
  std::string store_path = "bmi_history.sqlite";
  double margin = facepipe::kDefaultCropMargin;
  int port = 8080;  // 0 -> pick an ephemeral port
};

// HTTP surface:
//   POST /predict            multipart field "image" (+ optional "user_id")
//                            -> {bmi, category, model_id}
//   GET  /history/<user_id>  -> ordered JSON array of prediction records
// Errors use {error_code, message} with codes FTE, BAD_IMAGE, NO_MODEL,
// STORE_DOWN.
class BmiService {
 public:
  explicit BmiService(const ServiceOptions& options);
  ~BmiService();

  BmiService(const BmiService&) = delete;
  BmiService& operator=(const BmiService&) = delete;

  // Serves on options.port in the calling thread (CLI entry point).
  int run_blocking();

  // Background serving for tests: binds (ephemeral port when port == 0),
  // then serves on an internal thread until stop().
  int start_background();
  void stop();
  int port() const { return port_; }

  const eval::Predictor* predictor() const {
    return predictor_ ? &*predictor_ : nullptr;
  }

 private:
  void setup_routes();

  ServiceOptions options_;
  std::optional<eval::Predictor> predictor_;
  std::unique_ptr<HistoryStore> store_;
  std::unique_ptr<httplib::Server> server_;
  std::thread serve_thread_;
  int port_ = 0;
};

}  // namespace bmi::service
