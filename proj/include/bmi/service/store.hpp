#pragma once

#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "bmi/dataset/dataset.hpp"

struct sqlite3;

namespace bmi::service {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PredictionRecord {
  std::string user_id;
  std::int64_t ts_micros = 0;  // UTC
  double bmi = 0.0;
  dataset::BmiCategory category = dataset::BmiCategory::normal;
  std::string model_id;
};

std::string iso8601_utc(std::int64_t micros);

// Per-user prediction history in a single sqlite file. Timestamps are
// assigned at log time and kept strictly increasing per user, so a burst of
// requests within one clock tick still orders deterministically.
class HistoryStore {
 public:
  explicit HistoryStore(const std::string& path);
  ~HistoryStore();

  HistoryStore(const HistoryStore&) = delete;
  HistoryStore& operator=(const HistoryStore&) = delete;

  PredictionRecord log_prediction(const std::string& user_id, double bmi,
                                  dataset::BmiCategory category, const std::string& model_id);

  std::vector<PredictionRecord> history(const std::string& user_id) const;

 private:
  sqlite3* db_ = nullptr;
  mutable std::mutex mutex_;
};

}  // namespace bmi::service
