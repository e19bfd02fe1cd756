#include "tripleagent/model.hpp"

#include <algorithm>

namespace tripleagent::model {

bool is_wire_identifier(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '/' || c == '$' || c == '.';
  });
}

int category_rank(PointCategory c) {
  switch (c) {
    case PointCategory::Fragile:
      return 0;
    case PointCategory::Sensitive:
      return 1;
    case PointCategory::Immunized:
      return 2;
    case PointCategory::Unreached:
      break;
  }
  throw UsageError("UNREACHED has no place in the category order");
}

ClassifyOutcome classify(const OracleVerdict& first_hit, const OracleVerdict& always) {
  if (first_hit.reason == VerdictReason::NotRun || always.reason == VerdictReason::NotRun) {
    throw UsageError("classify requires two completed experiment verdicts");
  }
  const bool b1 = first_hit.passed();
  const bool b2 = always.passed();
  if (!b1 && !b2) return {PointCategory::Fragile, false};
  if (b1 && !b2) return {PointCategory::Sensitive, false};
  if (b1 && b2) return {PointCategory::Immunized, false};
  // first injection already unacceptable, yet continuous injection passed:
  // the worst observed behaviour wins, flagged for the report.
  return {PointCategory::Fragile, true};
}

std::uint64_t experiment_budget(std::uint64_t n_points, std::uint64_t n_candidates) {
  return 2 * (n_points + n_candidates);
}

BindingStatus binding_status(PointCategory original, PointCategory achieved) {
  const int before = category_rank(original);
  const int after = category_rank(achieved);
  if (after > before) return BindingStatus::ValidatedImprovement;
  if (after == before && original != PointCategory::Fragile) {
    return BindingStatus::AlternativeResilient;
  }
  return BindingStatus::NoEffect;
}

TransitionCell transition_label(PointCategory original, PointCategory best_achieved) {
  const int from = category_rank(original);
  const int to = category_rank(best_achieved);
  if (to < from) throw UsageError("transition_label: achieved category below original");
  switch (from * 3 + to) {
    case 0:
      return TransitionCell::A;  // fragile -> fragile
    case 1:
      return TransitionCell::B;  // fragile -> sensitive
    case 2:
      return TransitionCell::C;  // fragile -> immunized
    case 4:
      return TransitionCell::D;  // sensitive -> sensitive
    case 5:
      return TransitionCell::E;  // sensitive -> immunized
    case 8:
      return TransitionCell::F;  // immunized -> immunized
    default:
      throw UsageError("transition_label: impossible pair");
  }
}

bool trace_contains(const std::vector<std::string>& emitted,
                    const std::vector<std::string>& expected) {
  std::size_t next = 0;
  for (const auto& token : emitted) {
    if (next < expected.size() && token == expected[next]) ++next;
  }
  return next == expected.size();
}

OracleVerdict evaluate_oracle(const ExecutionView& view, const AcceptabilityOracle& oracle,
                              const ExternalCheck& external_check) {
  if (!view.launched) return {VerdictReason::NotRun};
  if (view.timed_out || view.exit == ExitKind::Hang) return {VerdictReason::Freeze};
  if (oracle.require_normal_exit && view.exit != ExitKind::Normal) {
    return {VerdictReason::Crash};
  }
  switch (oracle.domain) {
    case DomainCheck::TraceExact:
    case DomainCheck::TraceContains: {
      if (view.trace == nullptr) {
        throw UsageError("trace oracle applied to a target without an emitted trace");
      }
      const bool ok = oracle.domain == DomainCheck::TraceExact
                          ? *view.trace == oracle.expected_trace
                          : trace_contains(*view.trace, oracle.expected_trace);
      return {ok ? VerdictReason::Ok : VerdictReason::DomainCheckFailed};
    }
    case DomainCheck::ExternalCommand: {
      if (!external_check) {
        throw UsageError("external-command oracle needs a check hook");
      }
      const ExternalCheckResult result = external_check();
      if (!result.ran) return {VerdictReason::NotRun};
      return {result.passed ? VerdictReason::Ok : VerdictReason::DomainCheckFailed};
    }
  }
  throw UsageError("unknown domain check");
}

namespace {

[[noreturn]] void bad_token(std::string_view what, std::string_view token) {
  throw ParseError(std::string("unknown ") + std::string(what) + " token: " + std::string(token));
}

}  // namespace

std::string_view to_token(FaultModel m) {
  return m == FaultModel::FirstHit ? "FIRST_HIT" : "ALWAYS";
}

std::string_view to_token(PointCategory c) {
  switch (c) {
    case PointCategory::Fragile:
      return "FRAGILE";
    case PointCategory::Sensitive:
      return "SENSITIVE";
    case PointCategory::Immunized:
      return "IMMUNIZED";
    case PointCategory::Unreached:
      return "UNREACHED";
  }
  return "?";
}

std::string_view to_token(ExitKind e) {
  switch (e) {
    case ExitKind::Normal:
      return "NORMAL";
    case ExitKind::Crash:
      return "CRASH";
    case ExitKind::Hang:
      return "HANG";
  }
  return "?";
}

std::string_view to_token(HandlerKind k) {
  return k == HandlerKind::Manual ? "MANUAL" : "FO_WRAPPER";
}

std::string_view to_token(VerdictReason r) {
  switch (r) {
    case VerdictReason::Ok:
      return "OK";
    case VerdictReason::Crash:
      return "CRASH";
    case VerdictReason::Freeze:
      return "FREEZE";
    case VerdictReason::DomainCheckFailed:
      return "DOMAIN_CHECK_FAILED";
    case VerdictReason::NotRun:
      return "NOT_RUN";
  }
  return "?";
}

std::string_view to_token(BindingStatus s) {
  switch (s) {
    case BindingStatus::ValidatedImprovement:
      return "VALIDATED_IMPROVEMENT";
    case BindingStatus::AlternativeResilient:
      return "ALTERNATIVE_RESILIENT";
    case BindingStatus::NoEffect:
      return "NO_EFFECT";
  }
  return "?";
}

std::string_view to_token(TransitionCell c) {
  switch (c) {
    case TransitionCell::A:
      return "a";
    case TransitionCell::B:
      return "b";
    case TransitionCell::C:
      return "c";
    case TransitionCell::D:
      return "d";
    case TransitionCell::E:
      return "e";
    case TransitionCell::F:
      return "f";
  }
  return "?";
}

FaultModel fault_model_from_token(std::string_view token) {
  if (token == "FIRST_HIT") return FaultModel::FirstHit;
  if (token == "ALWAYS") return FaultModel::Always;
  bad_token("fault model", token);
}

PointCategory point_category_from_token(std::string_view token) {
  if (token == "FRAGILE") return PointCategory::Fragile;
  if (token == "SENSITIVE") return PointCategory::Sensitive;
  if (token == "IMMUNIZED") return PointCategory::Immunized;
  if (token == "UNREACHED") return PointCategory::Unreached;
  bad_token("point category", token);
}

ExitKind exit_kind_from_token(std::string_view token) {
  if (token == "NORMAL") return ExitKind::Normal;
  if (token == "CRASH") return ExitKind::Crash;
  if (token == "HANG") return ExitKind::Hang;
  bad_token("exit kind", token);
}

HandlerKind handler_kind_from_token(std::string_view token) {
  if (token == "MANUAL") return HandlerKind::Manual;
  if (token == "FO_WRAPPER") return HandlerKind::FoWrapper;
  bad_token("handler kind", token);
}

VerdictReason verdict_reason_from_token(std::string_view token) {
  if (token == "OK") return VerdictReason::Ok;
  if (token == "CRASH") return VerdictReason::Crash;
  if (token == "FREEZE") return VerdictReason::Freeze;
  if (token == "DOMAIN_CHECK_FAILED") return VerdictReason::DomainCheckFailed;
  if (token == "NOT_RUN") return VerdictReason::NotRun;
  bad_token("verdict reason", token);
}

BindingStatus binding_status_from_token(std::string_view token) {
  if (token == "VALIDATED_IMPROVEMENT") return BindingStatus::ValidatedImprovement;
  if (token == "ALTERNATIVE_RESILIENT") return BindingStatus::AlternativeResilient;
  if (token == "NO_EFFECT") return BindingStatus::NoEffect;
  bad_token("binding status", token);
}

}  // namespace tripleagent::model
