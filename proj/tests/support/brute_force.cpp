#include "brute_force.hpp"

#include <algorithm>

namespace testsupport {

namespace {

using namespace tripleagent;

bool is_subsequence(const std::vector<std::string>& expected,
                    const std::vector<std::string>& emitted) {
  std::size_t matched = 0;
  for (const auto& token : emitted) {
    if (matched < expected.size() && token == expected[matched]) ++matched;
  }
  return matched == expected.size();
}

bool acceptable(const simprog::ExecutionResult& result,
                const std::vector<std::string>& expected_trace, bool contains_mode) {
  if (result.exit != model::ExitKind::Normal) return false;
  return contains_mode ? is_subsequence(expected_trace, result.emitted_trace)
                       : result.emitted_trace == expected_trace;
}

simprog::ExecutionResult run_with(const simprog::ProgramModel& program,
                                  const simprog::WorkloadSpec& workload,
                                  const model::PerturbationPoint& point,
                                  model::FaultModel fault_model,
                                  const std::optional<model::MethodRef>& handler,
                                  std::uint64_t step_budget) {
  simprog::InjectionPlan injection;
  injection.active_point = point;
  injection.fault_model = fault_model;
  simprog::FOPlan fo;
  if (handler) fo.active_handlers.insert(*handler);
  return simprog::execute(program, workload, injection, fo, step_budget);
}

model::PointCategory category_from(bool b1, bool b2) {
  if (b1 && b2) return model::PointCategory::Immunized;
  if (b1 && !b2) return model::PointCategory::Sensitive;
  // both remaining rows, including the anomalous (!b1, b2) one, are fragile
  return model::PointCategory::Fragile;
}

/// Deduplicated method names of the frames the injected exception crossed,
/// raising frame first. Empty when the injection never happened or the
/// stack is unusable.
std::vector<model::MethodRef> extract_candidates(const simprog::ExecutionResult& result,
                                                 const model::PerturbationPoint& point) {
  if (result.injection_stacks.empty()) return {};
  const simprog::InjectionRecord& injection = result.injection_stacks.front();
  std::size_t end = 0;
  bool resolved = false;
  for (const auto& caught : result.catch_events) {
    if (caught.seq < injection.seq) continue;
    if (caught.exception_type == point.exception_type && caught.raiser == point.method) {
      if (caught.kind != model::HandlerKind::Manual) return {};
      end = caught.stack_distance;
      resolved = true;
      break;
    }
  }
  if (!resolved) {
    if (result.exit != model::ExitKind::Crash) return {};
    end = injection.stack.size();
  }
  std::vector<model::MethodRef> out;
  for (std::size_t i = 0; i < end && i < injection.stack.size(); ++i) {
    if (std::find(out.begin(), out.end(), injection.stack[i]) == out.end()) {
      out.push_back(injection.stack[i]);
    }
  }
  return out;
}

}  // namespace

BruteForceResult brute_force_campaign(const simprog::ProgramModel& program,
                                      const simprog::WorkloadSpec& workload,
                                      const std::vector<std::string>& expected_trace,
                                      bool contains_mode, std::uint64_t step_budget) {
  BruteForceResult out;
  const simprog::ExecutionResult baseline =
      simprog::execute(program, workload, simprog::InjectionPlan{}, simprog::FOPlan{},
                       step_budget);

  // own enumeration: every method, every declared exception, every location
  std::vector<std::pair<model::PerturbationPoint, model::PointCategory>> classified;
  for (const auto& [method, body] : program.methods) {
    for (std::uint32_t location = 0; location < body.statements.size(); ++location) {
      for (const auto& exception_type : body.declared_exceptions) {
        const model::PerturbationPoint point{method, location, exception_type};
        const auto reached = baseline.reach_counts.find(point);
        if (reached == baseline.reach_counts.end() || reached->second == 0) {
          out.classification.unreached.insert(point);
          continue;
        }
        const bool b1 = acceptable(
            run_with(program, workload, point, model::FaultModel::FirstHit, {}, step_budget),
            expected_trace, contains_mode);
        const bool b2 = acceptable(
            run_with(program, workload, point, model::FaultModel::Always, {}, step_budget),
            expected_trace, contains_mode);
        const model::PointCategory category = category_from(b1, b2);
        switch (category) {
          case model::PointCategory::Fragile:
            out.classification.fragile.insert(point);
            break;
          case model::PointCategory::Sensitive:
            out.classification.sensitive.insert(point);
            break;
          case model::PointCategory::Immunized:
            out.classification.immunized.insert(point);
            break;
          case model::PointCategory::Unreached:
            break;
        }
        classified.emplace_back(point, category);
      }
    }
  }

  // candidate collection re-executes the first-hit experiment per point
  for (const auto& [point, original] : classified) {
    const simprog::ExecutionResult discovery =
        run_with(program, workload, point, model::FaultModel::FirstHit, {}, step_budget);
    for (const auto& handler : extract_candidates(discovery, point)) {
      out.candidates.push_back({point, handler});

      const bool a1 = acceptable(run_with(program, workload, point,
                                          model::FaultModel::FirstHit, handler, step_budget),
                                 expected_trace, contains_mode);
      const bool a2 = acceptable(run_with(program, workload, point, model::FaultModel::Always,
                                          handler, step_budget),
                                 expected_trace, contains_mode);
      const model::PointCategory achieved = category_from(a1, a2);
      const int gain =
          model::category_rank(achieved) - model::category_rank(original);
      if (gain > 0) {
        out.validated.push_back({{point, handler}, achieved,
                                 model::BindingStatus::ValidatedImprovement});
      } else if (gain == 0 && original != model::PointCategory::Fragile) {
        out.validated.push_back({{point, handler}, achieved,
                                 model::BindingStatus::AlternativeResilient});
      }
    }
  }
  return out;
}

}  // namespace testsupport
