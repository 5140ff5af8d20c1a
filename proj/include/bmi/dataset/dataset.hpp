#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace bmi::dataset {

enum class Gender { male, female, unknown };
enum class DatasetTag { visualbmi, vip_attribute, bollywood, synthetic };
enum class Split { train, test, unassigned };

// One annotated record of a BMI-labelled face dataset.
struct FaceSample {
  std::string sample_id;
  std::string image_ref;
  Gender gender = Gender::unknown;
  double bmi = 0.0;  // kg/m^2
  DatasetTag dataset_tag = DatasetTag::synthetic;
  Split split = Split::unassigned;
};

// Standard half-open clinical bins: [0,18.5) underweight, [18.5,25) normal,
// [25,30) overweight, [30,35) moderately obese, [35,40) severely obese,
// [40,inf) very severely obese.
enum class BmiCategory {
  underweight,
  normal,
  overweight,
  moderately_obese,
  severely_obese,
  very_severely_obese,
};

inline constexpr std::array<double, 5> kBmiBoundaries{18.5, 25.0, 30.0, 35.0, 40.0};

// Throws std::domain_error for bmi <= 0.
BmiCategory categorize_bmi(double bmi);

std::string to_string(BmiCategory category);
std::string to_string(Gender gender);
std::string to_string(DatasetTag tag);
Gender parse_gender(const std::string& text);       // throws on unknown token
DatasetTag parse_dataset_tag(const std::string& text);

struct SplitProtocol {
  std::string name = "default";
  int train_count = 0;
  int test_count = 0;
  bool gender_balanced_test = false;
  std::uint64_t seed = 0;
};

struct RejectedRow {
  int line = 0;  // 1-based line number in the manifest
  std::string sample_id;
  std::string reason;
};

struct IngestResult {
  std::vector<FaceSample> samples;  // valid rows, manifest order
  std::vector<RejectedRow> rejected;
};

// Manifest format: UTF-8 CSV, header `sample_id,image_ref,gender,bmi,dataset_tag`.
// Invalid rows (bad gender/tag, unparsable or out-of-range BMI, duplicate id)
// are collected into the result, never thrown. A missing file or a wrong
// header is an error.
IngestResult load_manifest(const std::string& path);

nlohmann::json ingest_report(const IngestResult& result);

struct SplitResult {
  std::vector<FaceSample> train;
  std::vector<FaceSample> test;
};

// Deterministic seeded draw. The test set is drawn first (stratified by
// gender when gender_balanced_test is set), the train set from the
// remainder; leftovers stay unassigned. Infeasible protocols raise an
// error naming the shortfall.
SplitResult apply_split(const std::vector<FaceSample>& samples,
                        const SplitProtocol& protocol);

struct DatasetSummary {
  std::array<int, 6> category_counts{};  // indexed by BmiCategory
  int male = 0;
  int female = 0;
  int unknown = 0;
  int total = 0;
};

DatasetSummary dataset_summary(const std::vector<FaceSample>& samples);

nlohmann::json summary_json(const DatasetSummary& summary);

}  // namespace bmi::dataset
