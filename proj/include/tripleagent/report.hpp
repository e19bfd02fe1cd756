#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tripleagent/controller.hpp"
#include "tripleagent/model.hpp"

namespace tripleagent::report {

struct BindingRow {
  model::MethodRef handler;
  model::PointCategory achieved = model::PointCategory::Fragile;
  model::BindingStatus status = model::BindingStatus::NoEffect;

  bool operator==(const BindingRow&) const = default;
};

struct PointRow {
  model::PerturbationPoint point;
  model::PointCategory category = model::PointCategory::Unreached;
  std::optional<model::MethodRef> default_handler;
  std::uint64_t candidate_count = 0;
  std::vector<BindingRow> bindings;

  bool operator==(const PointRow&) const = default;
};

struct CandidateStats {
  std::uint64_t min = 0;
  std::uint64_t median = 0;
  std::uint64_t max = 0;

  bool operator==(const CandidateStats&) const = default;
};

/// Developer-facing campaign summary. Rows are sorted by (category,
/// method, location, exception); matrix cells are indexed a..f.
struct Report {
  std::uint64_t fragile = 0;
  std::uint64_t sensitive = 0;
  std::uint64_t immunized = 0;
  std::uint64_t unreached = 0;
  std::array<std::uint64_t, 6> matrix{};
  std::vector<PointRow> rows;
  CandidateStats candidate_stats;
  std::vector<controller::Anomaly> anomalies;
  std::uint64_t actual_executions = 0;
  std::uint64_t formula_executions = 0;
  double baseline_wall_ms = 0.0;
  double instrumented_inactive_wall_ms = 0.0;
  double overhead_percent = 0.0;

  bool operator==(const Report&) const = default;
};

/// Builds the deterministic report for a finished campaign. Throws
/// IntegrityError when the state violates the conservation invariants
/// (category counts summing to |P|, matrix rows matching origin counts).
Report build_report(const controller::CampaignState& state);

/// Min / lower-middle median / max over per-point candidate counts.
/// The counts must cover every detected point, zero-candidate ones
/// included; an empty input yields all zeros.
CandidateStats candidate_stats(std::vector<std::uint64_t> per_point_counts);

/// Wall-clock overhead of the instrumented-inactive run over the baseline,
/// as a percentage. The baseline must be positive.
double overhead_compare(double baseline_ms, double instrumented_inactive_ms);

std::string render_human(const Report& report);
std::string render_structured(const Report& report);
Report parse_structured(const std::string& text);
std::string render_csv_matrix(const Report& report);

}  // namespace tripleagent::report
