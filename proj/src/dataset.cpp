#include "bmi/dataset/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "bmi/common/rng.hpp"

namespace bmi::dataset {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

BmiCategory categorize_bmi(double bmi) {
  if (!(bmi > 0.0) || !std::isfinite(bmi)) {
    throw std::domain_error("categorize_bmi: bmi must be positive and finite");
  }
  int idx = 0;
  for (double boundary : kBmiBoundaries) {
    if (bmi < boundary) break;
    ++idx;
  }
  return static_cast<BmiCategory>(idx);
}

std::string to_string(BmiCategory category) {
  switch (category) {
    case BmiCategory::underweight: return "underweight";
    case BmiCategory::normal: return "normal";
    case BmiCategory::overweight: return "overweight";
    case BmiCategory::moderately_obese: return "moderately_obese";
    case BmiCategory::severely_obese: return "severely_obese";
    case BmiCategory::very_severely_obese: return "very_severely_obese";
  }
  return "?";
}

std::string to_string(Gender gender) {
  switch (gender) {
    case Gender::male: return "male";
    case Gender::female: return "female";
    case Gender::unknown: return "unknown";
  }
  return "?";
}

std::string to_string(DatasetTag tag) {
  switch (tag) {
    case DatasetTag::visualbmi: return "visualbmi";
    case DatasetTag::vip_attribute: return "vip_attribute";
    case DatasetTag::bollywood: return "bollywood";
    case DatasetTag::synthetic: return "synthetic";
  }
  return "?";
}

Gender parse_gender(const std::string& text) {
  if (text == "male") return Gender::male;
  if (text == "female") return Gender::female;
  if (text == "unknown") return Gender::unknown;
  throw std::invalid_argument("unknown gender '" + text + "'");
}

DatasetTag parse_dataset_tag(const std::string& text) {
  if (text == "visualbmi") return DatasetTag::visualbmi;
  if (text == "vip_attribute") return DatasetTag::vip_attribute;
  if (text == "bollywood") return DatasetTag::bollywood;
  if (text == "synthetic") return DatasetTag::synthetic;
  throw std::invalid_argument("unknown dataset tag '" + text + "'");
}

IngestResult load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_manifest: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_manifest: empty manifest " + path);
  }
  {
    auto header = split_csv(line);
    const std::vector<std::string> want = {"sample_id", "image_ref", "gender", "bmi",
                                           "dataset_tag"};
    if (std::vector<std::string>(header.begin(), header.end()) != want) {
      throw std::runtime_error("load_manifest: bad header in " + path);
    }
  }

  IngestResult result;
  std::unordered_set<std::string> seen_ids;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv(line);
    auto reject = [&](const std::string& id, const std::string& reason) {
      result.rejected.push_back({line_no, id, reason});
    };
    if (fields.size() != 5) {
      reject(fields.empty() ? "" : fields[0], "expected 5 fields, got " +
                                                  std::to_string(fields.size()));
      continue;
    }
    FaceSample sample;
    sample.sample_id = fields[0];
    sample.image_ref = fields[1];
    if (sample.sample_id.empty()) {
      reject("", "empty sample_id");
      continue;
    }
    if (!seen_ids.insert(sample.sample_id).second) {
      reject(sample.sample_id, "duplicate sample_id");
      continue;
    }
    try {
      sample.gender = parse_gender(fields[2]);
      sample.dataset_tag = parse_dataset_tag(fields[4]);
    } catch (const std::invalid_argument& e) {
      reject(sample.sample_id, e.what());
      continue;
    }
    try {
      std::size_t used = 0;
      sample.bmi = std::stod(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      reject(sample.sample_id, "unparsable bmi '" + fields[3] + "'");
      continue;
    }
    if (!(sample.bmi > 0.0) || !std::isfinite(sample.bmi)) {
      reject(sample.sample_id, "non-positive bmi " + fields[3]);
      continue;
    }
    if (sample.bmi < 10.0 || sample.bmi > 100.0) {
      reject(sample.sample_id, "bmi " + fields[3] + " outside [10, 100]");
      continue;
    }
    result.samples.push_back(std::move(sample));
  }
  return result;
}

nlohmann::json ingest_report(const IngestResult& result) {
  nlohmann::json rejected = nlohmann::json::array();
  for (const auto& row : result.rejected) {
    rejected.push_back({{"line", row.line},
                        {"sample_id", row.sample_id},
                        {"reason", row.reason}});
  }
  return {{"accepted", result.samples.size()}, {"rejected", rejected}};
}

SplitResult apply_split(const std::vector<FaceSample>& samples,
                        const SplitProtocol& protocol) {
  const int n = static_cast<int>(samples.size());
  if (protocol.train_count < 0 || protocol.test_count < 0) {
    throw std::invalid_argument("apply_split: negative protocol counts");
  }
  if (protocol.train_count + protocol.test_count > n) {
    throw std::runtime_error(
        "apply_split: protocol needs " +
        std::to_string(protocol.train_count + protocol.test_count) +
        " samples, have " + std::to_string(n));
  }

  std::mt19937_64 gen(protocol.seed);
  std::vector<int> test_idx;

  if (protocol.gender_balanced_test) {
    if (protocol.test_count % 2 != 0) {
      throw std::runtime_error(
          "apply_split: gender-balanced test_count must be even, got " +
          std::to_string(protocol.test_count));
    }
    const int per_gender = protocol.test_count / 2;
    std::vector<int> males, females;
    for (int i = 0; i < n; ++i) {
      if (samples[i].gender == Gender::male) males.push_back(i);
      if (samples[i].gender == Gender::female) females.push_back(i);
    }
    auto draw = [&](std::vector<int>& pool, const char* label) {
      if (static_cast<int>(pool.size()) < per_gender) {
        throw std::runtime_error(
            "apply_split: needs " + std::to_string(per_gender) + " " + label +
            " test samples, have " + std::to_string(pool.size()) + " (short " +
            std::to_string(per_gender - static_cast<int>(pool.size())) + ")");
      }
      shuffle_indices(pool, gen);
      test_idx.insert(test_idx.end(), pool.begin(), pool.begin() + per_gender);
    };
    draw(males, "male");
    draw(females, "female");
  } else {
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    shuffle_indices(all, gen);
    test_idx.assign(all.begin(), all.begin() + protocol.test_count);
  }

  std::vector<char> in_test(n, 0);
  for (int i : test_idx) in_test[i] = 1;
  std::vector<int> rest;
  for (int i = 0; i < n; ++i) {
    if (!in_test[i]) rest.push_back(i);
  }
  shuffle_indices(rest, gen);
  std::vector<int> train_idx(rest.begin(), rest.begin() + protocol.train_count);

  // Membership is what the seed pins down; outputs keep input order.
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  SplitResult result;
  result.train.reserve(train_idx.size());
  result.test.reserve(test_idx.size());
  for (int i : train_idx) {
    result.train.push_back(samples[i]);
    result.train.back().split = Split::train;
  }
  for (int i : test_idx) {
    result.test.push_back(samples[i]);
    result.test.back().split = Split::test;
  }
  return result;
}

DatasetSummary dataset_summary(const std::vector<FaceSample>& samples) {
  DatasetSummary s;
  for (const auto& sample : samples) {
    ++s.category_counts[static_cast<int>(categorize_bmi(sample.bmi))];
    switch (sample.gender) {
      case Gender::male: ++s.male; break;
      case Gender::female: ++s.female; break;
      case Gender::unknown: ++s.unknown; break;
    }
    ++s.total;
  }
  return s;
}

nlohmann::json summary_json(const DatasetSummary& s) {
  nlohmann::json categories;
  for (int i = 0; i < 6; ++i) {
    categories[to_string(static_cast<BmiCategory>(i))] = s.category_counts[i];
  }
  return {{"total", s.total},
          {"male", s.male},
          {"female", s.female},
          {"unknown", s.unknown},
          {"categories", categories}};
}

}  // namespace bmi::dataset
