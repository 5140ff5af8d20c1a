#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "bmi/common/rng.hpp"
#include "bmi/dataset/dataset.hpp"
#include "support/fixtures.hpp"

using namespace bmi;
using dataset::BmiCategory;
using dataset::FaceSample;
using dataset::Gender;

namespace {

std::string write_manifest(const testsupport::TempDir& dir, const std::string& name,
                           const std::vector<std::string>& rows) {
  const std::string path = dir.file(name);
  std::ofstream out(path);
  out << "sample_id,image_ref,gender,bmi,dataset_tag\n";
  for (const auto& row : rows) out << row << "\n";
  return path;
}

// Mirrors the published category breakdown of the VisualBMI collection
// (7/680/1151/941/681/746 across the six bins, 4206 rows total).
std::vector<FaceSample> visualbmi_like(int males_min = 1400) {
  static constexpr int kCounts[6] = {7, 680, 1151, 941, 681, 746};
  static constexpr double kRepresentative[6] = {17.0, 22.0, 27.0, 32.0, 37.0, 45.0};
  std::vector<FaceSample> samples;
  int id = 0;
  for (int cat = 0; cat < 6; ++cat) {
    for (int i = 0; i < kCounts[cat]; ++i) {
      FaceSample s;
      s.sample_id = "v" + std::to_string(id);
      s.image_ref = "unused.ppm";
      s.gender = id % 2 == 0 ? Gender::male : Gender::female;
      s.bmi = kRepresentative[cat];
      s.dataset_tag = dataset::DatasetTag::visualbmi;
      samples.push_back(std::move(s));
      ++id;
    }
  }
  REQUIRE(samples.size() == 4206);
  REQUIRE(males_min <= 2103);
  return samples;
}

}  // namespace

TEST_CASE("manifest ingestion preserves valid rows in order") {
  testsupport::TempDir dir("manifest");
  const auto path = write_manifest(dir, "ok.csv",
                                   {"a,1.ppm,male,22.5,synthetic",
                                    "b,2.ppm,female,31.0,synthetic",
                                    "c,3.ppm,unknown,19.2,synthetic"});
  const auto result = dataset::load_manifest(path);
  REQUIRE(result.samples.size() == 3);
  CHECK(result.rejected.empty());
  CHECK(result.samples[0].sample_id == "a");
  CHECK(result.samples[1].sample_id == "b");
  CHECK(result.samples[2].sample_id == "c");
  CHECK(result.samples[1].gender == Gender::female);
  CHECK(result.samples[2].bmi == doctest::Approx(19.2));
}

TEST_CASE("invalid rows are rejected into the ingest report, not thrown") {
  testsupport::TempDir dir("manifest");
  const auto path = write_manifest(
      dir, "bad.csv",
      {
          "ok,1.ppm,male,22.5,synthetic",
          "neg,2.ppm,male,-1,synthetic",           // non-positive
          "low,3.ppm,female,5.0,synthetic",        // below 10
          "high,4.ppm,female,140.0,synthetic",     // above 100
          "badg,5.ppm,alien,25.0,synthetic",       // unknown gender token
          "badbmi,6.ppm,male,abc,synthetic",       // unparsable bmi
          "ok,7.ppm,male,23.0,synthetic",          // duplicate id
          "short,8.ppm,male,23.0",                 // missing column
          "badtag,9.ppm,male,23.0,not_a_dataset",  // unknown tag
      });
  const auto result = dataset::load_manifest(path);
  CHECK(result.samples.size() == 1);
  REQUIRE(result.rejected.size() == 8);

  const auto report = dataset::ingest_report(result);
  CHECK(report.at("accepted").get<int>() == 1);
  REQUIRE(report.at("rejected").size() == 8);
  CHECK(report.at("rejected")[0].at("sample_id") == "neg");
  CHECK(report.at("rejected")[0].at("line") == 3);
  const std::string reason = report.at("rejected")[0].at("reason").get<std::string>();
  CHECK(reason.find("non-positive") != std::string::npos);
}

TEST_CASE("missing manifest and malformed header raise") {
  testsupport::TempDir dir("manifest");
  CHECK_THROWS_AS(dataset::load_manifest(dir.file("nope.csv")), std::runtime_error);
  const std::string path = dir.file("header.csv");
  {
    std::ofstream out(path);
    out << "id,path,sex,bmi,tag\nx,1.ppm,male,22,synthetic\n";
  }
  CHECK_THROWS_AS(dataset::load_manifest(path), std::runtime_error);
}

TEST_CASE("manifest at collection scale ingests every row") {
  testsupport::TempDir dir("manifest");
  const auto samples = visualbmi_like();
  std::vector<std::string> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) {
    rows.push_back(s.sample_id + "," + s.image_ref + "," + dataset::to_string(s.gender) + "," +
                   std::to_string(s.bmi) + ",visualbmi");
  }
  const auto path = write_manifest(dir, "visualbmi.csv", rows);
  const auto result = dataset::load_manifest(path);
  CHECK(result.samples.size() == 4206);
  CHECK(result.rejected.empty());
}

TEST_CASE("bmi categorization uses half-open clinical bins") {
  CHECK(dataset::categorize_bmi(17.0) == BmiCategory::underweight);
  CHECK(dataset::categorize_bmi(18.5) == BmiCategory::normal);  // boundary -> upper bin
  CHECK(dataset::categorize_bmi(24.999) == BmiCategory::normal);
  CHECK(dataset::categorize_bmi(25.0) == BmiCategory::overweight);
  CHECK(dataset::categorize_bmi(26.0) == BmiCategory::overweight);
  CHECK(dataset::categorize_bmi(30.0) == BmiCategory::moderately_obese);
  CHECK(dataset::categorize_bmi(35.0) == BmiCategory::severely_obese);
  CHECK(dataset::categorize_bmi(40.0) == BmiCategory::very_severely_obese);
  CHECK(dataset::categorize_bmi(42.0) == BmiCategory::very_severely_obese);

  CHECK_THROWS_AS(dataset::categorize_bmi(0.0), std::domain_error);
  CHECK_THROWS_AS(dataset::categorize_bmi(-3.0), std::domain_error);
}

TEST_CASE("categorization is monotone in bmi") {
  std::mt19937_64 gen(42);
  for (int i = 0; i < 500; ++i) {
    const double a = uniform(gen, 1.0, 80.0);
    const double b = uniform(gen, 1.0, 80.0);
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    CHECK(static_cast<int>(dataset::categorize_bmi(lo)) <=
          static_cast<int>(dataset::categorize_bmi(hi)));
  }
}

TEST_CASE("dataset summary reproduces the collection breakdown") {
  const auto samples = visualbmi_like();
  const auto summary = dataset::dataset_summary(samples);
  CHECK(summary.total == 4206);
  CHECK(summary.category_counts[0] == 7);
  CHECK(summary.category_counts[1] == 680);
  CHECK(summary.category_counts[2] == 1151);
  CHECK(summary.category_counts[3] == 941);
  CHECK(summary.category_counts[4] == 681);
  CHECK(summary.category_counts[5] == 746);
  int total = 0;
  for (int c : summary.category_counts) total += c;
  CHECK(total == summary.total);
}

TEST_CASE("dataset summary trivial cases") {
  CHECK(dataset::dataset_summary({}).total == 0);

  std::vector<FaceSample> tens(10);
  for (int i = 0; i < 10; ++i) {
    tens[i].sample_id = std::to_string(i);
    tens[i].bmi = 22.0;
    tens[i].gender = Gender::male;
  }
  const auto summary = dataset::dataset_summary(tens);
  CHECK(summary.category_counts[1] == 10);
  CHECK(summary.category_counts[0] + summary.category_counts[2] + summary.category_counts[3] +
            summary.category_counts[4] + summary.category_counts[5] ==
        0);
}

TEST_CASE("dataset summary is permutation invariant") {
  auto samples = visualbmi_like();
  const auto before = dataset::dataset_summary(samples);
  std::mt19937_64 gen(7);
  shuffle_indices(samples, gen);
  const auto after = dataset::dataset_summary(samples);
  CHECK(before.category_counts == after.category_counts);
  CHECK(before.male == after.male);
  CHECK(before.female == after.female);
}

TEST_CASE("gender-balanced split reproduces the published test composition") {
  // 4206 rows minus the 8 enrollment failures the full pipeline sees.
  auto samples = visualbmi_like();
  samples.resize(4198);
  const dataset::SplitProtocol protocol{"visualbmi", 2896, 1302, true, 99};
  const auto split = dataset::apply_split(samples, protocol);
  CHECK(split.train.size() == 2896);
  REQUIRE(split.test.size() == 1302);
  int male = 0, female = 0;
  for (const auto& s : split.test) {
    male += s.gender == Gender::male;
    female += s.gender == Gender::female;
  }
  CHECK(male == 651);
  CHECK(female == 651);
}

TEST_CASE("vip-style split yields 150 male and 150 female test rows") {
  std::vector<FaceSample> samples;
  for (int i = 0; i < 1026; ++i) {
    FaceSample s;
    s.sample_id = "p" + std::to_string(i);
    s.gender = i < 513 ? Gender::male : Gender::female;
    s.bmi = 24.0;
    samples.push_back(s);
  }
  const auto split = dataset::apply_split(samples, {"vip", 726, 300, true, 5});
  CHECK(split.train.size() == 726);
  int male = 0, female = 0;
  for (const auto& s : split.test) {
    male += s.gender == Gender::male;
    female += s.gender == Gender::female;
  }
  CHECK(male == 150);
  CHECK(female == 150);
}

TEST_CASE("evaluation-only protocol sends everything to test") {
  std::vector<FaceSample> samples(236);
  for (int i = 0; i < 236; ++i) {
    samples[i].sample_id = "b" + std::to_string(i);
    samples[i].gender = i < 231 ? Gender::male : Gender::female;
    samples[i].bmi = 25.0;
  }
  const auto split = dataset::apply_split(samples, {"bollywood", 0, 236, false, 1});
  CHECK(split.train.empty());
  CHECK(split.test.size() == 236);
}

TEST_CASE("infeasible protocols fail loudly, naming the shortfall") {
  std::vector<FaceSample> samples(10);
  for (int i = 0; i < 10; ++i) {
    samples[i].sample_id = std::to_string(i);
    samples[i].gender = i < 9 ? Gender::male : Gender::female;
    samples[i].bmi = 22.0;
  }
  // Only one female available but the balanced draw needs three.
  try {
    dataset::apply_split(samples, {"x", 0, 6, true, 1});
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    CHECK(what.find("female") != std::string::npos);
    CHECK(what.find("short") != std::string::npos);
  }

  CHECK_THROWS(dataset::apply_split(samples, {"x", 8, 6, false, 1}));  // 14 > 10
  CHECK_THROWS(dataset::apply_split(samples, {"x", 0, 5, true, 1}));   // odd balanced count
}

TEST_CASE("splits partition the input and are seed-reproducible") {
  std::mt19937_64 gen(11);
  for (int round = 0; round < 20; ++round) {
    const int n = 20 + static_cast<int>(uniform_index(gen, 200));
    std::vector<FaceSample> samples(n);
    for (int i = 0; i < n; ++i) {
      samples[i].sample_id = "s" + std::to_string(i);
      samples[i].gender = uniform_index(gen, 2) == 0 ? Gender::male : Gender::female;
      samples[i].bmi = uniform(gen, 15.0, 45.0);
    }
    const int test_n = static_cast<int>(uniform_index(gen, n / 2));
    const int train_n = static_cast<int>(uniform_index(gen, n - test_n));
    const dataset::SplitProtocol protocol{"prop", train_n, test_n, false, gen()};

    const auto a = dataset::apply_split(samples, protocol);
    const auto b = dataset::apply_split(samples, protocol);

    // identical membership across runs
    REQUIRE(a.train.size() == b.train.size());
    REQUIRE(a.test.size() == b.test.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
      CHECK(a.train[i].sample_id == b.train[i].sample_id);
    }
    for (std::size_t i = 0; i < a.test.size(); ++i) {
      CHECK(a.test[i].sample_id == b.test[i].sample_id);
    }

    // disjoint, and sizes add up
    std::set<std::string> seen;
    for (const auto& s : a.train) seen.insert(s.sample_id);
    for (const auto& s : a.test) {
      CHECK(seen.insert(s.sample_id).second);
    }
    CHECK(a.train.size() + a.test.size() <= samples.size());
    CHECK(a.train.size() == static_cast<std::size_t>(train_n));
    CHECK(a.test.size() == static_cast<std::size_t>(test_n));
  }
}
