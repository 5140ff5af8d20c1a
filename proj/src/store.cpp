#include "bmi/service/store.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include <sqlite3.h>

namespace bmi::service {

namespace {

void check(int rc, sqlite3* db, const std::string& what) {
  if (rc != SQLITE_OK && rc != SQLITE_DONE && rc != SQLITE_ROW) {
    throw StoreError("store: " + what + ": " +
                     (db ? sqlite3_errmsg(db) : "unknown sqlite error"));
  }
}

struct Stmt {
  sqlite3_stmt* stmt = nullptr;
  ~Stmt() {
    if (stmt) sqlite3_finalize(stmt);
  }
};

}  // namespace

std::string iso8601_utc(std::int64_t micros) {
  const std::time_t secs = static_cast<std::time_t>(micros / 1000000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%06dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(micros % 1000000));
  return buf;
}

HistoryStore::HistoryStore(const std::string& path) {
  check(sqlite3_open(path.c_str(), &db_), db_, "open " + path);
  const char* ddl =
      "CREATE TABLE IF NOT EXISTS predictions ("
      "  user_id TEXT NOT NULL,"
      "  ts_micros INTEGER NOT NULL,"
      "  bmi REAL NOT NULL,"
      "  category TEXT NOT NULL,"
      "  model_id TEXT NOT NULL);"
      "CREATE INDEX IF NOT EXISTS idx_predictions_user_ts"
      "  ON predictions(user_id, ts_micros);";
  char* err = nullptr;
  if (sqlite3_exec(db_, ddl, nullptr, nullptr, &err) != SQLITE_OK) {
    const std::string message = err ? err : "schema setup failed";
    sqlite3_free(err);
    throw StoreError("store: " + message);
  }
}

HistoryStore::~HistoryStore() {
  if (db_) sqlite3_close(db_);
}

PredictionRecord HistoryStore::log_prediction(const std::string& user_id, double bmi,
                                              dataset::BmiCategory category,
                                              const std::string& model_id) {
  if (user_id.empty()) {
    throw std::invalid_argument("store: user_id must be non-empty");
  }
  std::lock_guard<std::mutex> lock(mutex_);

  std::int64_t now = std::chrono::duration_cast<std::chrono::microseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
  {
    Stmt s;
    check(sqlite3_prepare_v2(db_, "SELECT MAX(ts_micros) FROM predictions WHERE user_id = ?1",
                             -1, &s.stmt, nullptr),
          db_, "prepare max-ts");
    sqlite3_bind_text(s.stmt, 1, user_id.c_str(), -1, SQLITE_TRANSIENT);
    if (sqlite3_step(s.stmt) == SQLITE_ROW && sqlite3_column_type(s.stmt, 0) != SQLITE_NULL) {
      const std::int64_t last = sqlite3_column_int64(s.stmt, 0);
      if (now <= last) now = last + 1;  // strictly increasing per user
    }
  }

  PredictionRecord record{user_id, now, bmi, category, model_id};
  Stmt s;
  check(sqlite3_prepare_v2(db_,
                           "INSERT INTO predictions (user_id, ts_micros, bmi, category, "
                           "model_id) VALUES (?1, ?2, ?3, ?4, ?5)",
                           -1, &s.stmt, nullptr),
        db_, "prepare insert");
  sqlite3_bind_text(s.stmt, 1, user_id.c_str(), -1, SQLITE_TRANSIENT);
  sqlite3_bind_int64(s.stmt, 2, record.ts_micros);
  sqlite3_bind_double(s.stmt, 3, record.bmi);
  const std::string cat = dataset::to_string(record.category);
  sqlite3_bind_text(s.stmt, 4, cat.c_str(), -1, SQLITE_TRANSIENT);
  sqlite3_bind_text(s.stmt, 5, record.model_id.c_str(), -1, SQLITE_TRANSIENT);
  check(sqlite3_step(s.stmt), db_, "insert prediction");
  return record;
}

std::vector<PredictionRecord> HistoryStore::history(const std::string& user_id) const {
  if (user_id.empty()) {
    throw std::invalid_argument("store: user_id must be non-empty");
  }
  std::lock_guard<std::mutex> lock(mutex_);
  Stmt s;
  check(sqlite3_prepare_v2(db_,
                           "SELECT ts_micros, bmi, category, model_id FROM predictions "
                           "WHERE user_id = ?1 ORDER BY ts_micros ASC",
                           -1, &s.stmt, nullptr),
        db_, "prepare history");
  sqlite3_bind_text(s.stmt, 1, user_id.c_str(), -1, SQLITE_TRANSIENT);
  std::vector<PredictionRecord> out;
  int rc;
  while ((rc = sqlite3_step(s.stmt)) == SQLITE_ROW) {
    PredictionRecord r;
    r.user_id = user_id;
    r.ts_micros = sqlite3_column_int64(s.stmt, 0);
    r.bmi = sqlite3_column_double(s.stmt, 1);
    const auto* cat = reinterpret_cast<const char*>(sqlite3_column_text(s.stmt, 2));
    for (int i = 0; i < 6; ++i) {
      if (dataset::to_string(static_cast<dataset::BmiCategory>(i)) == (cat ? cat : "")) {
        r.category = static_cast<dataset::BmiCategory>(i);
      }
    }
    const auto* model = reinterpret_cast<const char*>(sqlite3_column_text(s.stmt, 3));
    r.model_id = model ? model : "";
    out.push_back(std::move(r));
  }
  check(rc, db_, "walk history");
  return out;
}

}  // namespace bmi::service
