#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bmi/img/synth.hpp"
#include "support/fixtures.hpp"

// Exercises the staged command-line workflow end to end:
// ingest -> enroll -> extract -> train -> eval -> report.

namespace fs = std::filesystem;
using namespace bmi;

namespace {

std::string cli_path() {
  const char* cli = std::getenv("BMI_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "BMI_CLI must point at the bmi binary (set by ctest)");
  return cli;
}

int run(const std::string& args, const std::string& log) {
  const std::string cmd = "\"" + cli_path() + "\" " + args + " > " + log + " 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("staged cli workflow produces a full evaluation") {
  testsupport::TempDir dir("cli");
  img::SynthDatasetOptions synth;
  synth.count = 44;
  synth.blank_count = 2;
  synth.seed = 31337;
  const std::string manifest = img::write_synthetic_dataset(dir.file("data"), synth);
  const std::string detector = testsupport::detector_asset_path();

  // ingest
  CHECK(run("ingest " + manifest + " --report " + dir.file("ingest.json"),
            dir.file("ingest.log")) == 0);
  CHECK(nlohmann::json::parse(slurp(dir.file("ingest.json"))).at("accepted") == 46);

  // enroll
  CHECK(run("enroll --manifest " + manifest + " --detector " + detector + " --out-crops " +
                dir.file("crops") + " --fte-report " + dir.file("fte.json"),
            dir.file("enroll.log")) == 0);
  const auto fte = nlohmann::json::parse(slurp(dir.file("fte.json")));
  CHECK(fte.at("fte").size() == 2);
  int crop_files = 0;
  for (const auto& entry : fs::directory_iterator(dir.file("crops"))) {
    crop_files += entry.path().extension() == ".ppm";
  }
  CHECK(crop_files == 44);

  // extract
  CHECK(run("extract --backbone stub --crops " + dir.file("crops") + " --cache-dir " +
                dir.file("cache"),
            dir.file("extract.log")) == 0);
  CHECK(fs::exists(dir.file("cache/stub.feat")));
  CHECK(fs::exists(dir.file("cache/stub.idx.json")));

  const std::string split_flags =
      " --train-count 30 --test-count 12 --balanced --seed 17 ";

  // train (ridge and svr through the same features)
  CHECK(run("train --regressor ridge --backbone stub --manifest " + manifest +
                " --cache-dir " + dir.file("cache") + " --crops " + dir.file("crops") +
                split_flags + "--lambda 1.0 --out " + dir.file("ridge.bmimodel"),
            dir.file("train.log")) == 0);
  CHECK(fs::exists(dir.file("ridge.bmimodel")));

  CHECK(run("train --regressor svr --backbone stub --manifest " + manifest + " --cache-dir " +
                dir.file("cache") + " --crops " + dir.file("crops") + split_flags +
                "--svr-c 1.0 --svr-epsilon 0.2 --out " + dir.file("svr.bmimodel"),
            dir.file("train_svr.log")) == 0);

  // eval both heads
  CHECK(run("eval --model " + dir.file("ridge.bmimodel") + " --manifest " + manifest +
                " --cache-dir " + dir.file("cache") + " --crops " + dir.file("crops") +
                split_flags + "--fte-report " + dir.file("fte.json") + " --out-dir " +
                dir.file("eval_ridge"),
            dir.file("eval.log")) == 0);
  const auto report = nlohmann::json::parse(slurp(dir.file("eval_ridge/report.json")));
  CHECK(report.at("n_overall") == 12);
  CHECK(report.at("fte_count") == 2);
  CHECK(report.at("mae_overall").get<double>() < 4.0);  // brightness signal is learnable
  CHECK(fs::exists(dir.file("eval_ridge/predictions.csv")));

  CHECK(run("eval --model " + dir.file("svr.bmimodel") + " --manifest " + manifest +
                " --cache-dir " + dir.file("cache") + " --crops " + dir.file("crops") +
                split_flags + "--fte-report " + dir.file("fte.json") + " --out-dir " +
                dir.file("eval_svr"),
            dir.file("eval_svr.log")) == 0);

  // comparison table over both reports
  CHECK(run("report --inputs " + dir.file("eval_ridge/report.json") + " " +
                dir.file("eval_svr/report.json") + " --out-prefix " + dir.file("tables"),
            dir.file("report.log")) == 0);
  const std::string text = slurp(dir.file("tables.txt"));
  CHECK(text.find("RR Overall") != std::string::npos);
  CHECK(text.find("SVR Overall") != std::string::npos);
  const std::string csv = slurp(dir.file("tables.csv"));
  CHECK(csv.find("model,ridge_overall,svr_overall") != std::string::npos);

  // bad inputs exit nonzero
  CHECK(run("ingest " + dir.file("nope.csv"), dir.file("bad.log")) != 0);
  CHECK(run("run " + dir.file("nope.json"), dir.file("bad2.log")) != 0);
}
