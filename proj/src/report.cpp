#include "bmi/eval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace bmi::eval {

namespace {

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void set_optional(nlohmann::json& doc, const char* key, const std::optional<double>& v) {
  if (v) {
    doc[key] = *v;
  } else {
    doc[key] = nullptr;
  }
}

std::optional<double> get_optional(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  return doc.at(key).get<double>();
}

}  // namespace

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json doc = {
      {"dataset_tag", dataset_tag}, {"model_id", model_id},   {"regressor", regressor},
      {"mae_overall", mae_overall}, {"n_overall", n_overall}, {"n_male", n_male},
      {"n_female", n_female},       {"fte_count", fte_count},
  };
  set_optional(doc, "mae_male", mae_male);
  set_optional(doc, "mae_female", mae_female);
  set_optional(doc, "pearson_overall", pearson_overall);
  return doc;
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& doc) {
  EvaluationReport r;
  r.dataset_tag = doc.value("dataset_tag", "");
  r.model_id = doc.value("model_id", "");
  r.regressor = doc.value("regressor", "");
  r.mae_overall = doc.at("mae_overall").get<double>();
  r.n_overall = doc.value("n_overall", 0);
  r.n_male = doc.value("n_male", 0);
  r.n_female = doc.value("n_female", 0);
  r.fte_count = doc.value("fte_count", 0);
  r.mae_male = get_optional(doc, "mae_male");
  r.mae_female = get_optional(doc, "mae_female");
  r.pearson_overall = get_optional(doc, "pearson_overall");
  return r;
}

EvaluationReport grouped_report(const PredictionSet& preds, int fte_count) {
  preds.validate();
  EvaluationReport report;
  report.dataset_tag = preds.dataset_tag;
  report.model_id = preds.model_id;
  report.regressor = preds.regressor;
  report.fte_count = fte_count;
  report.n_overall = static_cast<int>(preds.rows.size());

  PredictionSet male, female;
  for (const auto& row : preds.rows) {
    if (row.gender == dataset::Gender::male) male.rows.push_back(row);
    if (row.gender == dataset::Gender::female) female.rows.push_back(row);
  }
  report.n_male = static_cast<int>(male.rows.size());
  report.n_female = static_cast<int>(female.rows.size());

  if (!preds.rows.empty()) {
    report.mae_overall = mae(preds);
  }
  if (!male.rows.empty()) report.mae_male = mae(male);
  if (!female.rows.empty()) report.mae_female = mae(female);

  if (preds.rows.size() >= 2) {
    try {
      report.pearson_overall = pearson(preds);
    } catch (const std::domain_error&) {
      // zero-variance series: correlation undefined, field stays absent
    }
  }
  return report;
}

TableOutput emit_tables(const std::vector<EvaluationReport>& reports) {
  if (reports.empty()) {
    throw std::invalid_argument("emit_tables: no reports");
  }

  // Row identity: model, plus the dataset tag when several are mixed.
  std::set<std::string> tags;
  for (const auto& r : reports) tags.insert(r.dataset_tag);
  auto row_label = [&](const EvaluationReport& r) {
    return tags.size() > 1 ? r.model_id + " (" + r.dataset_tag + ")" : r.model_id;
  };

  // Regressor column order: rr, svr, then anything else as it appears.
  std::vector<std::string> kinds;
  auto add_kind = [&](const std::string& k) {
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
  };
  for (const char* preferred : {"ridge", "svr"}) {
    for (const auto& r : reports) {
      if (r.regressor == preferred) add_kind(preferred);
    }
  }
  for (const auto& r : reports) add_kind(r.regressor);

  std::vector<std::string> labels;
  std::map<std::string, std::map<std::string, const EvaluationReport*>> grid;
  for (const auto& r : reports) {
    const std::string label = row_label(r);
    if (grid.find(label) == grid.end()) labels.push_back(label);
    grid[label][r.regressor] = &r;
  }

  const bool any_male = std::any_of(reports.begin(), reports.end(),
                                    [](const auto& r) { return r.mae_male.has_value(); });
  const bool any_female = std::any_of(reports.begin(), reports.end(),
                                      [](const auto& r) { return r.mae_female.has_value(); });

  struct Column {
    std::string header;
    std::string group;  // overall | male | female
    std::string kind;
  };
  auto kind_label = [](const std::string& kind) {
    if (kind == "ridge") return std::string("RR");
    if (kind == "svr") return std::string("SVR");
    return std::string("CNN");
  };
  std::vector<Column> columns;
  auto add_group = [&](const std::string& group, const std::string& title) {
    for (const auto& kind : kinds) {
      columns.push_back({kind_label(kind) + " " + title, group, kind});
    }
  };
  add_group("overall", "Overall");
  if (any_male) add_group("male", "Male");
  if (any_female) add_group("female", "Female");

  auto cell = [&](const std::string& label, const Column& col) -> std::string {
    const auto row_it = grid.find(label);
    const auto it = row_it->second.find(col.kind);
    if (it == row_it->second.end()) return "N/A";
    const EvaluationReport& r = *it->second;
    std::optional<double> v;
    if (col.group == "overall") v = r.mae_overall;
    if (col.group == "male") v = r.mae_male;
    if (col.group == "female") v = r.mae_female;
    return v ? two_decimals(*v) : "N/A";
  };

  // Text table.
  std::size_t label_width = 5;
  for (const auto& label : labels) label_width = std::max(label_width, label.size());
  std::ostringstream text;
  text << std::string(label_width, ' ') << " | ";
  for (std::size_t c = 0; c < columns.size(); ++c) {
    text << columns[c].header << (c + 1 < columns.size() ? " | " : "");
  }
  text << "\n";
  for (const auto& label : labels) {
    text << label << std::string(label_width - label.size(), ' ') << " | ";
    for (std::size_t c = 0; c < columns.size(); ++c) {
      text << cell(label, columns[c]) << (c + 1 < columns.size() ? " | " : "");
    }
    text << "\n";
  }

  // CSV twin with machine-friendly column ids.
  std::ostringstream csv;
  csv << "model";
  for (const auto& col : columns) {
    std::string id = col.kind + "_" + col.group;
    csv << "," << id;
  }
  csv << "\n";
  for (const auto& label : labels) {
    csv << label;
    for (const auto& col : columns) csv << "," << cell(label, col);
    csv << "\n";
  }

  return {text.str(), csv.str()};
}

}  // namespace bmi::eval
