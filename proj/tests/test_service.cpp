#include <doctest.h>

#include <atomic>
#include <thread>

#include "bmi/eval/experiment.hpp"
#include "bmi/img/synth.hpp"
#include "bmi/regression/model_io.hpp"
#include "bmi/service/server.hpp"
#include "bmi/service/store.hpp"
#include "support/fixtures.hpp"

// httplib last: it drags in resolv.h, whose _res macro mangles Eigen internals
#include <httplib.h>

using namespace bmi;

namespace {

// Constant-output ridge head over stub features: bias 24, zero weights.
std::string write_constant_model(const testsupport::TempDir& dir, double intercept = 24.0) {
  regression::RidgeModel model;
  model.weights = Eigen::VectorXd::Zero(features::find_backbone("stub").feature_dim);
  model.intercept = intercept;
  model.backbone_id = "stub";
  const std::string path = dir.file("const.bmimodel");
  regression::save_model(model, path);
  return path;
}

std::string face_bytes(std::uint64_t seed) {
  img::PortraitParams p;
  p.canvas_w = p.canvas_h = 160;
  p.face_cx = 80;
  p.face_cy = 80;
  p.face_size = 92;
  p.brightness = 0.7;
  p.bg_style = 1;
  p.seed = seed;
  return img::encode_ppm(render_portrait(p));
}

httplib::Result post_image(httplib::Client& client, const std::string& bytes,
                           const std::string& user_id = "") {
  httplib::MultipartFormDataItems items = {
      {"image", bytes, "probe.ppm", "application/octet-stream"}};
  if (!user_id.empty()) {
    items.push_back({"user_id", user_id, "", ""});
  }
  return client.Post("/predict", items);
}

}  // namespace

TEST_CASE("history store orders records and survives reopen") {
  testsupport::TempDir dir("store");
  const std::string path = dir.file("h.sqlite");
  {
    service::HistoryStore store(path);
    CHECK(store.history("nobody").empty());
    store.log_prediction("alice", 23.5, dataset::BmiCategory::normal, "m1");
    store.log_prediction("alice", 24.5, dataset::BmiCategory::normal, "m1");
    store.log_prediction("bob", 31.0, dataset::BmiCategory::moderately_obese, "m1");

    const auto alice = store.history("alice");
    REQUIRE(alice.size() == 2);
    CHECK(alice[0].bmi == 23.5);
    CHECK(alice[1].bmi == 24.5);
    CHECK(alice[0].ts_micros < alice[1].ts_micros);
    CHECK(store.history("bob").size() == 1);
    CHECK_THROWS_AS(store.log_prediction("", 20.0, dataset::BmiCategory::normal, "m"),
                    std::invalid_argument);
  }
  service::HistoryStore reopened(path);
  CHECK(reopened.history("alice").size() == 2);
  CHECK(reopened.history("bob").size() == 1);
}

TEST_CASE("a hundred records survive a restart in order") {
  testsupport::TempDir dir("store100");
  const std::string path = dir.file("h.sqlite");
  {
    service::HistoryStore store(path);
    for (int i = 0; i < 100; ++i) {
      store.log_prediction("u", 20.0 + i * 0.1, dataset::BmiCategory::normal, "m");
    }
  }
  service::HistoryStore reopened(path);
  const auto records = reopened.history("u");
  REQUIRE(records.size() == 100);
  for (int i = 0; i < 100; ++i) {
    CHECK(records[static_cast<std::size_t>(i)].bmi == doctest::Approx(20.0 + i * 0.1));
    if (i > 0) {
      CHECK(records[static_cast<std::size_t>(i - 1)].ts_micros <
            records[static_cast<std::size_t>(i)].ts_micros);
    }
  }
}

TEST_CASE("iso8601 rendering of store timestamps") {
  CHECK(service::iso8601_utc(0) == "1970-01-01T00:00:00.000000Z");
  CHECK(service::iso8601_utc(1754006455123456LL) == "2025-08-01T00:00:55.123456Z");
}

TEST_CASE("predict endpoint classifies, logs and reports structured errors") {
  testsupport::TempDir dir("svc");
  service::ServiceOptions options;
  options.model_path = write_constant_model(dir);
  options.detector_path = testsupport::detector_asset_path();
  options.store_path = dir.file("svc.sqlite");
  options.port = 0;
  service::BmiService service(options);
  const int port = service.start_background();
  httplib::Client client("127.0.0.1", port);

  const std::string face = face_bytes(404);

  SUBCASE("constant model answers 24.0 / normal") {
    auto res = post_image(client, face);
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const auto body = nlohmann::json::parse(res->body);
    CHECK(body.at("bmi").get<double>() == 24.0);
    CHECK(body.at("category") == "normal");
    CHECK(body.at("model_id") == "ridge+stub");
  }

  SUBCASE("same image twice gives identical responses") {
    auto a = post_image(client, face);
    auto b = post_image(client, face);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->body == b->body);
  }

  SUBCASE("blank image maps to the FTE error class") {
    auto res = post_image(client, img::encode_ppm(img::render_blank(160, 160)));
    REQUIRE(res);
    CHECK(res->status == 422);
    CHECK(nlohmann::json::parse(res->body).at("error_code") == "FTE");
  }

  SUBCASE("undecodable payload maps to BAD_IMAGE") {
    auto res = post_image(client, "definitely not a ppm");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(nlohmann::json::parse(res->body).at("error_code") == "BAD_IMAGE");

    auto missing = client.Post("/predict", httplib::MultipartFormDataItems{
                                               {"unrelated", "x", "", ""}});
    REQUIRE(missing);
    CHECK(missing->status == 400);
  }

  SUBCASE("predictions with a user_id land in the history") {
    REQUIRE(post_image(client, face, "carol"));
    REQUIRE(post_image(client, face, "carol"));
    auto res = client.Get("/history/carol");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const auto body = nlohmann::json::parse(res->body);
    REQUIRE(body.size() == 2);
    CHECK(body[0].at("bmi") == 24.0);
    CHECK(body[0].at("ts_micros").get<std::int64_t>() <
          body[1].at("ts_micros").get<std::int64_t>());
    CHECK(client.Get("/history/nobody")->body == "[]");
  }

  service.stop();
}

TEST_CASE("endpoint output equals the library predictor bit for bit") {
  testsupport::TempDir dir("parity");

  // A non-trivial head: ridge trained on flattened stub features.
  regression::TrainMatrix data;
  const int dim = features::find_backbone("stub").feature_dim;
  data.X = Eigen::MatrixXd::Random(40, dim) * 0.2;
  data.y = Eigen::VectorXd::LinSpaced(40, 18.0, 42.0);
  auto head = regression::fit_ridge(data, 1.0, true);
  head.backbone_id = "stub";
  const std::string model_path = dir.file("ridge.bmimodel");
  regression::save_model(head, model_path);

  service::ServiceOptions options;
  options.model_path = model_path;
  options.detector_path = testsupport::detector_asset_path();
  options.store_path = dir.file("svc.sqlite");
  options.port = 0;
  service::BmiService service(options);
  const int port = service.start_background();
  httplib::Client client("127.0.0.1", port);

  const auto predictor = eval::Predictor::load(model_path, testsupport::detector_asset_path());
  int compared = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::string bytes = face_bytes(seed * 31);
    auto res = post_image(client, bytes);
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const double via_http = nlohmann::json::parse(res->body).at("bmi").get<double>();
    const auto via_lib = predictor.predict_image(img::decode_image(bytes));
    CHECK(via_http == via_lib.bmi);  // bitwise: JSON doubles round-trip exactly
    ++compared;
  }
  CHECK(compared == 20);
  service.stop();
}

TEST_CASE("history is preserved across a service restart") {
  testsupport::TempDir dir("restart");
  service::ServiceOptions options;
  options.model_path = write_constant_model(dir);
  options.detector_path = testsupport::detector_asset_path();
  options.store_path = dir.file("svc.sqlite");
  options.port = 0;

  const std::string face = face_bytes(77);
  std::vector<std::int64_t> before;
  {
    service::BmiService service(options);
    const int port = service.start_background();
    httplib::Client client("127.0.0.1", port);
    for (int i = 0; i < 5; ++i) REQUIRE(post_image(client, face, "dave"));
    auto res = client.Get("/history/dave");
    for (const auto& r : nlohmann::json::parse(res->body)) {
      before.push_back(r.at("ts_micros").get<std::int64_t>());
    }
    service.stop();
  }

  service::BmiService reborn(options);
  const int port = reborn.start_background();
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/history/dave");
  REQUIRE(res);
  std::vector<std::int64_t> after;
  for (const auto& r : nlohmann::json::parse(res->body)) {
    after.push_back(r.at("ts_micros").get<std::int64_t>());
  }
  CHECK(after == before);
  REQUIRE(post_image(client, face, "dave"));
  CHECK(nlohmann::json::parse(client.Get("/history/dave")->body).size() == 6);
  reborn.stop();
}

TEST_CASE("concurrent clients get consistent answers") {
  testsupport::TempDir dir("parallel");
  service::ServiceOptions options;
  options.model_path = write_constant_model(dir);
  options.detector_path = testsupport::detector_asset_path();
  options.store_path = dir.file("svc.sqlite");
  options.port = 0;
  service::BmiService service(options);
  const int port = service.start_background();

  const std::string face = face_bytes(606);
  std::atomic<int> good{0};
  std::vector<std::thread> workers;
  for (int t = 0; t < 4; ++t) {
    workers.emplace_back([&, t] {
      httplib::Client client("127.0.0.1", port);
      for (int i = 0; i < 5; ++i) {
        auto res = post_image(client, face, "user" + std::to_string(t));
        if (res && res->status == 200 &&
            nlohmann::json::parse(res->body).at("bmi").get<double>() == 24.0) {
          ++good;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  CHECK(good == 20);

  httplib::Client client("127.0.0.1", port);
  for (int t = 0; t < 4; ++t) {
    const auto hist =
        nlohmann::json::parse(client.Get("/history/user" + std::to_string(t))->body);
    CHECK(hist.size() == 5);
    for (std::size_t i = 1; i < hist.size(); ++i) {
      CHECK(hist[i - 1].at("ts_micros").get<std::int64_t>() <
            hist[i].at("ts_micros").get<std::int64_t>());
    }
  }
  service.stop();
}

TEST_CASE("service without a model answers NO_MODEL") {
  testsupport::TempDir dir("nomodel");
  service::ServiceOptions options;
  options.detector_path = testsupport::detector_asset_path();
  options.store_path = dir.file("svc.sqlite");
  options.port = 0;
  service::BmiService service(options);
  const int port = service.start_background();
  httplib::Client client("127.0.0.1", port);
  auto res = post_image(client, face_bytes(5));
  REQUIRE(res);
  CHECK(res->status == 503);
  CHECK(nlohmann::json::parse(res->body).at("error_code") == "NO_MODEL");
  service.stop();
}
