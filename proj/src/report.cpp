#include "tripleagent/report.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace tripleagent::report {

namespace {

using nlohmann::json;

std::string lowercase(std::string_view token) {
  std::string out(token);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string improvement_text(const BindingRow& binding, model::PointCategory original) {
  if (binding.status == model::BindingStatus::AlternativeResilient) {
    return "alternative resilient method";
  }
  return lowercase(model::to_token(original)) + " - " + lowercase(model::to_token(binding.achieved));
}

int row_sort_rank(model::PointCategory c) {
  return c == model::PointCategory::Unreached ? 3 : model::category_rank(c);
}

constexpr std::array<std::pair<model::PointCategory, model::PointCategory>, 6> kMatrixPairs = {{
    {model::PointCategory::Fragile, model::PointCategory::Fragile},
    {model::PointCategory::Fragile, model::PointCategory::Sensitive},
    {model::PointCategory::Fragile, model::PointCategory::Immunized},
    {model::PointCategory::Sensitive, model::PointCategory::Sensitive},
    {model::PointCategory::Sensitive, model::PointCategory::Immunized},
    {model::PointCategory::Immunized, model::PointCategory::Immunized},
}};

json point_to_json(const model::PerturbationPoint& point) {
  return {{"method", point.method.identifier},
          {"location", point.location},
          {"exception", point.exception_type}};
}

model::PerturbationPoint point_from_json(const json& value) {
  model::PerturbationPoint point;
  point.method.identifier = value.at("method").get<std::string>();
  point.location = value.at("location").get<std::uint32_t>();
  point.exception_type = value.at("exception").get<std::string>();
  return point;
}

std::string point_label(const model::PerturbationPoint& point) {
  return point.method.identifier + "@" + std::to_string(point.location);
}

}  // namespace

CandidateStats candidate_stats(std::vector<std::uint64_t> per_point_counts) {
  CandidateStats stats;
  if (per_point_counts.empty()) return stats;
  std::sort(per_point_counts.begin(), per_point_counts.end());
  stats.min = per_point_counts.front();
  stats.max = per_point_counts.back();
  // lower-middle median for even counts
  stats.median = per_point_counts[(per_point_counts.size() - 1) / 2];
  return stats;
}

double overhead_compare(double baseline_ms, double instrumented_inactive_ms) {
  if (baseline_ms <= 0.0 || instrumented_inactive_ms < 0.0) {
    throw UsageError("overhead_compare needs a positive baseline");
  }
  return (instrumented_inactive_ms - baseline_ms) / baseline_ms * 100.0;
}

Report build_report(const controller::CampaignState& state) {
  Report report;
  report.fragile = state.classification.fragile.size();
  report.sensitive = state.classification.sensitive.size();
  report.immunized = state.classification.immunized.size();
  report.unreached = state.classification.unreached.size();
  if (report.fragile + report.sensitive + report.immunized + report.unreached !=
      state.points.size()) {
    throw IntegrityError("classification does not partition the detected point set");
  }

  std::vector<std::uint64_t> per_point_counts;
  per_point_counts.reserve(state.points.size());
  for (const auto& point : state.points) {
    PointRow row;
    row.point = point;
    row.category = state.category_of(point);
    const auto handler = state.default_handlers.find(point);
    if (handler != state.default_handlers.end()) row.default_handler = handler->second;
    row.candidate_count = state.candidate_count(point);
    per_point_counts.push_back(row.candidate_count);
    for (const auto& entry : state.validated) {
      if (entry.binding.point == point) {
        row.bindings.push_back({entry.binding.handler, entry.achieved, entry.status});
      }
    }
    if (row.category != model::PointCategory::Unreached) {
      const model::TransitionCell cell =
          model::transition_label(row.category, state.best_achieved(point));
      ++report.matrix[static_cast<std::size_t>(cell)];
    }
    report.rows.push_back(std::move(row));
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const PointRow& a, const PointRow& b) {
    const int ra = row_sort_rank(a.category);
    const int rb = row_sort_rank(b.category);
    if (ra != rb) return ra < rb;
    return a.point < b.point;
  });

  // each origin row of the matrix must account for every reached point of
  // that original category
  const std::array<std::uint64_t, 3> origin_counts = {report.fragile, report.sensitive,
                                                      report.immunized};
  for (std::size_t origin = 0; origin < 3; ++origin) {
    std::uint64_t row_sum = 0;
    for (std::size_t cell = 0; cell < kMatrixPairs.size(); ++cell) {
      if (model::category_rank(kMatrixPairs[cell].first) == static_cast<int>(origin)) {
        row_sum += report.matrix[cell];
      }
    }
    if (row_sum != origin_counts[origin]) {
      throw IntegrityError("transition matrix row does not match its origin count");
    }
  }

  report.candidate_stats = candidate_stats(std::move(per_point_counts));
  report.anomalies = state.anomalies;
  report.actual_executions = state.executions_total;
  const std::uint64_t reached = report.fragile + report.sensitive + report.immunized;
  report.formula_executions =
      model::experiment_budget(reached, state.candidates.size()) + 1;
  report.baseline_wall_ms = state.baseline_wall_ms;
  report.instrumented_inactive_wall_ms = state.instrumented_inactive_wall_ms;
  report.overhead_percent =
      state.baseline_wall_ms > 0.0
          ? overhead_compare(state.baseline_wall_ms, state.instrumented_inactive_wall_ms)
          : 0.0;
  return report;
}

std::string render_human(const Report& report) {
  std::ostringstream out;
  out << "Perturbation point classification\n";
  out << "  fragile    " << report.fragile << '\n';
  out << "  sensitive  " << report.sensitive << '\n';
  out << "  immunized  " << report.immunized << '\n';
  out << "  unreached  " << report.unreached << '\n';
  out << '\n';

  out << "Transition matrix (original -> best achieved)\n";
  static constexpr const char* kCellText[6] = {
      "a) fragile   -> fragile  ", "b) fragile   -> sensitive", "c) fragile   -> immunized",
      "d) sensitive -> sensitive", "e) sensitive -> immunized", "f) immunized -> immunized",
  };
  for (std::size_t cell = 0; cell < 6; ++cell) {
    out << "  " << kCellText[cell] << "  " << report.matrix[cell] << '\n';
  }
  out << '\n';

  out << "Failure-oblivious methods\n";
  out << "  Perturbation Point | Exception Type | Default Handling Method | "
         "Failure-oblivious Method | Improvement\n";
  bool any_binding = false;
  for (const auto& row : report.rows) {
    for (const auto& binding : row.bindings) {
      any_binding = true;
      out << "  " << point_label(row.point) << " | " << row.point.exception_type << " | "
          << (row.default_handler ? row.default_handler->identifier : "(uncaught)") << " | "
          << binding.handler.identifier << " | " << improvement_text(binding, row.category)
          << '\n';
    }
  }
  if (!any_binding) out << "  (none)\n";
  out << '\n';

  out << "Candidate failure-oblivious methods per point (min/median/max): "
      << report.candidate_stats.min << '/' << report.candidate_stats.median << '/'
      << report.candidate_stats.max << '\n';
  out << '\n';

  out << "Anomalies\n";
  if (report.anomalies.empty()) {
    out << "  (none)\n";
  } else {
    for (const auto& anomaly : report.anomalies) {
      out << "  " << point_label(anomaly.point) << " [" << anomaly.kind << "] "
          << anomaly.detail << '\n';
    }
  }
  out << '\n';

  out << "Budget: " << report.actual_executions << " workload executions ("
      << report.formula_executions << " by formula, baseline included)\n";
  out << std::fixed << std::setprecision(2);
  out << "Overhead: baseline " << report.baseline_wall_ms << " ms, instrumented inactive "
      << report.instrumented_inactive_wall_ms << " ms, " << report.overhead_percent << "%\n";
  return out.str();
}

std::string render_structured(const Report& report) {
  json doc;
  doc["report_version"] = 1;
  doc["counts"] = {{"fragile", report.fragile},
                   {"sensitive", report.sensitive},
                   {"immunized", report.immunized},
                   {"unreached", report.unreached}};
  json matrix;
  for (std::size_t cell = 0; cell < 6; ++cell) {
    matrix[std::string(model::to_token(static_cast<model::TransitionCell>(cell)))] =
        report.matrix[cell];
  }
  doc["matrix"] = std::move(matrix);
  json rows = json::array();
  for (const auto& row : report.rows) {
    json entry = point_to_json(row.point);
    entry["category"] = std::string(model::to_token(row.category));
    entry["default_handler"] =
        row.default_handler ? json(row.default_handler->identifier) : json(nullptr);
    entry["candidates"] = row.candidate_count;
    json bindings = json::array();
    for (const auto& binding : row.bindings) {
      bindings.push_back({{"handler", binding.handler.identifier},
                          {"achieved", std::string(model::to_token(binding.achieved))},
                          {"status", std::string(model::to_token(binding.status))}});
    }
    entry["bindings"] = std::move(bindings);
    rows.push_back(std::move(entry));
  }
  doc["points"] = std::move(rows);
  doc["candidate_stats"] = {{"min", report.candidate_stats.min},
                            {"median", report.candidate_stats.median},
                            {"max", report.candidate_stats.max}};
  json anomalies = json::array();
  for (const auto& anomaly : report.anomalies) {
    json entry = point_to_json(anomaly.point);
    entry["kind"] = anomaly.kind;
    entry["detail"] = anomaly.detail;
    anomalies.push_back(std::move(entry));
  }
  doc["anomalies"] = std::move(anomalies);
  doc["budget"] = {{"actual", report.actual_executions},
                   {"formula", report.formula_executions}};
  doc["overhead"] = {{"baseline_ms", report.baseline_wall_ms},
                     {"instrumented_inactive_ms", report.instrumented_inactive_wall_ms},
                     {"percent", report.overhead_percent}};
  return doc.dump(2) + "\n";
}

Report parse_structured(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  try {
    if (doc.at("report_version").get<int>() != 1) {
      throw ParseError("report: unsupported report_version");
    }
    Report report;
    report.fragile = doc.at("counts").at("fragile").get<std::uint64_t>();
    report.sensitive = doc.at("counts").at("sensitive").get<std::uint64_t>();
    report.immunized = doc.at("counts").at("immunized").get<std::uint64_t>();
    report.unreached = doc.at("counts").at("unreached").get<std::uint64_t>();
    for (std::size_t cell = 0; cell < 6; ++cell) {
      report.matrix[cell] =
          doc.at("matrix")
              .at(std::string(model::to_token(static_cast<model::TransitionCell>(cell))))
              .get<std::uint64_t>();
    }
    for (const json& entry : doc.at("points")) {
      PointRow row;
      row.point = point_from_json(entry);
      row.category = model::point_category_from_token(entry.at("category").get<std::string>());
      if (!entry.at("default_handler").is_null()) {
        row.default_handler = model::MethodRef{entry.at("default_handler").get<std::string>()};
      }
      row.candidate_count = entry.at("candidates").get<std::uint64_t>();
      for (const json& binding : entry.at("bindings")) {
        row.bindings.push_back(
            {model::MethodRef{binding.at("handler").get<std::string>()},
             model::point_category_from_token(binding.at("achieved").get<std::string>()),
             model::binding_status_from_token(binding.at("status").get<std::string>())});
      }
      report.rows.push_back(std::move(row));
    }
    report.candidate_stats.min = doc.at("candidate_stats").at("min").get<std::uint64_t>();
    report.candidate_stats.median = doc.at("candidate_stats").at("median").get<std::uint64_t>();
    report.candidate_stats.max = doc.at("candidate_stats").at("max").get<std::uint64_t>();
    for (const json& entry : doc.at("anomalies")) {
      controller::Anomaly anomaly;
      anomaly.point = point_from_json(entry);
      anomaly.kind = entry.at("kind").get<std::string>();
      anomaly.detail = entry.at("detail").get<std::string>();
      report.anomalies.push_back(std::move(anomaly));
    }
    report.actual_executions = doc.at("budget").at("actual").get<std::uint64_t>();
    report.formula_executions = doc.at("budget").at("formula").get<std::uint64_t>();
    report.baseline_wall_ms = doc.at("overhead").at("baseline_ms").get<double>();
    report.instrumented_inactive_wall_ms =
        doc.at("overhead").at("instrumented_inactive_ms").get<double>();
    report.overhead_percent = doc.at("overhead").at("percent").get<double>();
    return report;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

std::string render_csv_matrix(const Report& report) {
  std::ostringstream out;
  out << "origin,achieved,count\n";
  for (std::size_t cell = 0; cell < 6; ++cell) {
    out << lowercase(model::to_token(kMatrixPairs[cell].first)) << ','
        << lowercase(model::to_token(kMatrixPairs[cell].second)) << ',' << report.matrix[cell]
        << '\n';
  }
  return out.str();
}

}  // namespace tripleagent::report
