#include "bmi/service/server.hpp"

#include <iostream>

#include <httplib.h>
#include <json.hpp>

namespace bmi::service {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
  send_json(res, status, {{"error_code", code}, {"message", message}});
}

}  // namespace

BmiService::BmiService(const ServiceOptions& options) : options_(options) {
  if (!options_.model_path.empty()) {
    predictor_ = eval::Predictor::load(options_.model_path, options_.detector_path,
                                       options_.weights_dir, options_.margin);
  }
  store_ = std::make_unique<HistoryStore>(options_.store_path);
  server_ = std::make_unique<httplib::Server>();
  setup_routes();
}

BmiService::~BmiService() { stop(); }

void BmiService::setup_routes() {
  server_->Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
    if (!predictor_) {
      send_error(res, 503, "NO_MODEL", "no model is loaded");
      return;
    }
    if (!req.has_file("image")) {
      send_error(res, 400, "BAD_IMAGE", "multipart field 'image' is required");
      return;
    }
    img::Image image;
    try {
      image = img::decode_image(req.get_file_value("image").content);
    } catch (const img::ImageError& e) {
      send_error(res, 400, "BAD_IMAGE", e.what());
      return;
    }
    eval::Predictor::Output out;
    try {
      out = predictor_->predict_image(image);
    } catch (const eval::FteError& e) {
      send_error(res, 422, "FTE", e.what());
      return;
    } catch (const img::ImageError& e) {
      send_error(res, 400, "BAD_IMAGE", e.what());
      return;
    } catch (const std::exception& e) {
      send_error(res, 500, "INTERNAL", e.what());
      return;
    }
    if (req.has_file("user_id") && !req.get_file_value("user_id").content.empty()) {
      try {
        store_->log_prediction(req.get_file_value("user_id").content, out.bmi, out.category,
                               out.model_id);
      } catch (const StoreError& e) {
        send_error(res, 503, "STORE_DOWN", e.what());
        return;
      }
    }
    send_json(res, 200,
              {{"bmi", out.bmi},
               {"category", dataset::to_string(out.category)},
               {"model_id", out.model_id}});
  });

  server_->Get(R"(/history/([^/]+))", [this](const httplib::Request& req,
                                             httplib::Response& res) {
    const std::string user_id = req.matches[1];
    std::vector<PredictionRecord> records;
    try {
      records = store_->history(user_id);
    } catch (const StoreError& e) {
      send_error(res, 503, "STORE_DOWN", e.what());
      return;
    }
    nlohmann::json body = nlohmann::json::array();
    for (const auto& r : records) {
      body.push_back({{"user_id", r.user_id},
                      {"timestamp", iso8601_utc(r.ts_micros)},
                      {"ts_micros", r.ts_micros},
                      {"bmi", r.bmi},
                      {"category", dataset::to_string(r.category)},
                      {"model_id", r.model_id}});
    }
    send_json(res, 200, body);
  });
}

int BmiService::run_blocking() {
  port_ = options_.port;
  std::cout << "serving on port " << port_ << "\n";
  return server_->listen("0.0.0.0", port_) ? 0 : 1;
}

int BmiService::start_background() {
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port("127.0.0.1");
  } else {
    port_ = options_.port;
    if (!server_->bind_to_port("127.0.0.1", port_)) {
      throw std::runtime_error("service: cannot bind port " + std::to_string(port_));
    }
  }
  serve_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void BmiService::stop() {
  if (server_) {
    server_->stop();
  }
  if (serve_thread_.joinable()) {
    serve_thread_.join();
  }
}

}  // namespace bmi::service
