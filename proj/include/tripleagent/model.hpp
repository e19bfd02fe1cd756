#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tripleagent/errors.hpp"

namespace tripleagent::model {

/// Fully-qualified method name, e.g. "TorrentParser/getStringOrNull".
struct MethodRef {
  std::string identifier;

  auto operator<=>(const MethodRef&) const = default;
};

/// True when `s` is non-empty and restricted to [A-Za-z0-9_/$.], the
/// character set that survives the space-separated wire records unescaped.
bool is_wire_identifier(std::string_view s);

/// A statement before which an exception of a declared type can be
/// injected. `location` indexes the method's top-level statement list.
struct PerturbationPoint {
  MethodRef method;
  std::uint32_t location = 0;
  std::string exception_type;

  auto operator<=>(const PerturbationPoint&) const = default;
};

/// Injection cadence: once on the first reach of the point, or on every
/// reach.
enum class FaultModel { FirstHit, Always };

enum class PointCategory { Fragile, Sensitive, Immunized, Unreached };

/// Rank within the resilience order FRAGILE(0) < SENSITIVE(1) <
/// IMMUNIZED(2). UNREACHED is outside the order and rejected.
int category_rank(PointCategory c);

enum class ExitKind { Normal, Crash, Hang };

enum class HandlerKind { Manual, FoWrapper };

enum class VerdictReason { Ok, Crash, Freeze, DomainCheckFailed, NotRun };

/// Outcome of the acceptability oracle for one experiment. `passed()` holds
/// exactly when the reason is Ok.
struct OracleVerdict {
  VerdictReason reason = VerdictReason::NotRun;

  bool passed() const { return reason == VerdictReason::Ok; }
  auto operator<=>(const OracleVerdict&) const = default;
};

enum class DomainCheck { TraceExact, TraceContains, ExternalCommand };

/// Acceptable-behaviour predicate: generic checks (normal exit, no freeze)
/// combined with one domain-specific check.
struct AcceptabilityOracle {
  bool require_normal_exit = true;
  std::uint32_t timeout_ms = 60'000;

  DomainCheck domain = DomainCheck::TraceExact;
  /// Payload for TraceExact / TraceContains.
  std::vector<std::string> expected_trace;
  /// Payload for ExternalCommand; exit status 0 means the check passed.
  std::string command;
};

/// What one workload execution looked like, as far as the oracle cares.
/// `trace` may be null for targets that do not expose an emitted trace.
struct ExecutionView {
  ExitKind exit = ExitKind::Normal;
  bool timed_out = false;
  bool launched = true;
  const std::vector<std::string>* trace = nullptr;
};

struct ExternalCheckResult {
  bool ran = false;
  bool passed = false;
};

/// Hook the controller supplies for ExternalCommand oracles. Never invoked
/// when a generic check already failed.
using ExternalCheck = std::function<ExternalCheckResult()>;

/// A proposed pairing of a perturbation point with a method whose
/// catch-all wrapper may silence the injected exception.
struct CandidateBinding {
  PerturbationPoint point;
  MethodRef handler;

  auto operator<=>(const CandidateBinding&) const = default;
};

enum class BindingStatus { ValidatedImprovement, AlternativeResilient, NoEffect };

/// Transition-matrix cells: a) fragile stays fragile, b) fragile to
/// sensitive, c) fragile to immunized, d) sensitive stays sensitive,
/// e) sensitive to immunized, f) immunized stays immunized.
enum class TransitionCell { A, B, C, D, E, F };

/// Pointwise classification of a detected point set into four pairwise
/// disjoint sets whose union is the whole set.
struct Classification {
  std::set<PerturbationPoint> fragile;
  std::set<PerturbationPoint> sensitive;
  std::set<PerturbationPoint> immunized;
  std::set<PerturbationPoint> unreached;

  std::size_t total() const {
    return fragile.size() + sensitive.size() + immunized.size() + unreached.size();
  }
  bool operator==(const Classification&) const = default;
};

struct ClassifyOutcome {
  PointCategory category = PointCategory::Fragile;
  /// Set for the (first-hit fails, always passes) combination, which the
  /// classification truth table resolves conservatively to FRAGILE.
  bool anomaly = false;

  bool operator==(const ClassifyOutcome&) const = default;
};

/// Classification truth table over the two experiment verdicts. `first_hit`
/// is the verdict under FaultModel::FirstHit, `always` under Always. Both
/// verdicts must have been produced by a run (reason != NotRun).
ClassifyOutcome classify(const OracleVerdict& first_hit, const OracleVerdict& always);

/// Upper bound on workload executions: 2 x (points + candidates).
std::uint64_t experiment_budget(std::uint64_t n_points, std::uint64_t n_candidates);

/// Status of an assessed binding given the point's original category and
/// the category achieved with the binding active. UNREACHED is rejected.
BindingStatus binding_status(PointCategory original, PointCategory achieved);

/// Label for the transition-matrix cell of (original, best achieved).
/// Requires best >= original in category rank; downgrades are rejected.
TransitionCell transition_label(PointCategory original, PointCategory best_achieved);

/// Applies the oracle to one execution. Generic checks run first: a freeze
/// (timeout / simulated hang) or an abnormal exit short-circuits before the
/// domain check is consulted.
OracleVerdict evaluate_oracle(const ExecutionView& view, const AcceptabilityOracle& oracle,
                              const ExternalCheck& external_check = {});

/// True when `expected` is an order-preserving subsequence of `emitted`.
bool trace_contains(const std::vector<std::string>& emitted,
                    const std::vector<std::string>& expected);

// Wire / journal token spellings.
std::string_view to_token(FaultModel m);
std::string_view to_token(PointCategory c);
std::string_view to_token(ExitKind e);
std::string_view to_token(HandlerKind k);
std::string_view to_token(VerdictReason r);
std::string_view to_token(BindingStatus s);
std::string_view to_token(TransitionCell c);

FaultModel fault_model_from_token(std::string_view token);
PointCategory point_category_from_token(std::string_view token);
ExitKind exit_kind_from_token(std::string_view token);
HandlerKind handler_kind_from_token(std::string_view token);
VerdictReason verdict_reason_from_token(std::string_view token);
BindingStatus binding_status_from_token(std::string_view token);

}  // namespace tripleagent::model
