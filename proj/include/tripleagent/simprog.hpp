#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tripleagent/model.hpp"

namespace tripleagent::simprog {

struct Statement;

/// One catch clause: exception-type patterns (exact names or "*") mapped to
/// a handler statement list.
struct CatchClause {
  std::vector<std::string> types;
  std::vector<Statement> body;
};

struct EmitStmt {
  std::string token;
};
struct CallStmt {
  model::MethodRef target;
};
struct ThrowStmt {
  std::string exception_type;
};
struct TryStmt {
  std::vector<Statement> body;
  std::vector<CatchClause> clauses;
};
struct LoopStmt {
  std::uint32_t count = 1;
  std::vector<Statement> body;
};
struct HangStmt {};

struct Statement {
  std::variant<EmitStmt, CallStmt, ThrowStmt, TryStmt, LoopStmt, HangStmt> node;
};

struct MethodBody {
  /// Declared (checked) exception types; empty means the method contributes
  /// no perturbation points.
  std::vector<std::string> declared_exceptions;
  std::vector<Statement> statements;
};

struct ProgramModel {
  std::map<model::MethodRef, MethodBody> methods;
  model::MethodRef entry;
};

struct WorkloadSpec {
  struct Invocation {
    model::MethodRef method;
    std::uint32_t repeat = 1;
  };
  std::vector<Invocation> invocations;
};

/// At most one point is active per execution.
struct InjectionPlan {
  std::optional<model::PerturbationPoint> active_point;
  model::FaultModel fault_model = model::FaultModel::FirstHit;

  bool operator==(const InjectionPlan&) const = default;
};

/// Every method carries the catch-all wrapper regardless; it silences
/// exceptions only for the methods listed here, and re-raises elsewhere.
struct FOPlan {
  std::set<model::MethodRef> active_handlers;

  bool operator==(const FOPlan&) const = default;
};

struct InjectionRecord {
  model::PerturbationPoint point;
  /// Live call stack at the moment of injection, callee first, entry last.
  std::vector<model::MethodRef> stack;
  /// Position in the global monitored-event order (shared with catches).
  std::uint64_t seq = 0;

  bool operator==(const InjectionRecord&) const = default;
};

struct CatchEvent {
  std::string exception_type;
  model::MethodRef raiser;
  model::MethodRef catcher;
  /// Frames between the raising and the catching frame; 0 when caught
  /// where raised.
  std::uint32_t stack_distance = 0;
  model::HandlerKind kind = model::HandlerKind::Manual;
  std::uint64_t seq = 0;

  bool operator==(const CatchEvent&) const = default;
};

struct ExecutionResult {
  std::vector<std::string> emitted_trace;
  model::ExitKind exit = model::ExitKind::Normal;
  std::string crash_exception;                  // set when exit == Crash
  std::vector<model::MethodRef> crash_stack;    // stack at the fatal raise
  std::map<model::PerturbationPoint, std::uint64_t> reach_counts;
  std::vector<InjectionRecord> injection_stacks;
  std::vector<CatchEvent> catch_events;
  std::uint64_t steps_used = 0;

  bool operator==(const ExecutionResult&) const = default;
};

/// Call depth at which the interpreter raises a synthetic
/// "StackOverflowError" at the call site instead of pushing a new frame.
inline constexpr std::size_t kMaxCallDepth = 256;
inline constexpr std::string_view kStackOverflowType = "StackOverflowError";

/// Parses and validates a program document. Throws ParseError with a field
/// locus on malformed input, unknown call targets, or empty bodies.
ProgramModel parse_program(const std::string& text);
ProgramModel load_program(const std::filesystem::path& file);

WorkloadSpec parse_workload(const std::string& text);
WorkloadSpec load_workload(const std::filesystem::path& file);

/// Checks that every invocation references a method of `program`.
void validate_workload(const ProgramModel& program, const WorkloadSpec& workload);

/// All perturbation points of methods whose identifier starts with
/// `filter` (empty filter matches everything), ordered by method name,
/// then location, then exception type.
std::vector<model::PerturbationPoint> enumerate_points(const ProgramModel& program,
                                                       std::string_view filter = {});

/// Runs the workload under the given plans. Deterministic: identical inputs
/// produce identical results. Throws UsageError when step_budget is zero or
/// a plan references a method or point the program does not have.
ExecutionResult execute(const ProgramModel& program, const WorkloadSpec& workload,
                        const InjectionPlan& injection, const FOPlan& fo,
                        std::uint64_t step_budget);

/// Reference run with nothing activated.
ExecutionResult baseline_trace(const ProgramModel& program, const WorkloadSpec& workload,
                               std::uint64_t step_budget);

}  // namespace tripleagent::simprog
