#include <optional>

#include "tripleagent/simprog.hpp"

namespace tripleagent::simprog {

namespace {

struct PendingException {
  std::string type;
  model::MethodRef raiser;
  std::vector<model::MethodRef> stack_at_raise;  // callee first
};

enum class FlowKind { Normal, Exception, Exhausted };

struct Flow {
  FlowKind kind = FlowKind::Normal;
  std::optional<PendingException> pending;

  static Flow normal() { return {}; }
  static Flow exhausted() { return {FlowKind::Exhausted, std::nullopt}; }
};

bool clause_matches(const CatchClause& clause, const std::string& type) {
  for (const auto& pattern : clause.types) {
    if (pattern == "*" || pattern == type) return true;
  }
  return false;
}

class Interpreter {
 public:
  Interpreter(const ProgramModel& program, const InjectionPlan& injection, const FOPlan& fo,
              std::uint64_t budget)
      : program_(program), injection_(injection), fo_(fo), budget_(budget) {}

  ExecutionResult run(const WorkloadSpec& workload) {
    for (const auto& invocation : workload.invocations) {
      for (std::uint32_t i = 0; i < invocation.repeat; ++i) {
        Flow flow = call_method(invocation.method, /*caller=*/nullptr);
        if (flow.kind == FlowKind::Exception) {
          result_.exit = model::ExitKind::Crash;
          result_.crash_exception = flow.pending->type;
          result_.crash_stack = flow.pending->stack_at_raise;
          return std::move(result_);
        }
        if (flow.kind == FlowKind::Exhausted) {
          result_.exit = model::ExitKind::Hang;
          return std::move(result_);
        }
      }
    }
    result_.exit = model::ExitKind::Normal;
    return std::move(result_);
  }

 private:
  std::vector<model::MethodRef> snapshot() const {
    return {stack_.rbegin(), stack_.rend()};
  }

  Flow raise(std::string type, model::MethodRef raiser) {
    Flow flow;
    flow.kind = FlowKind::Exception;
    flow.pending = PendingException{std::move(type), std::move(raiser), snapshot()};
    return flow;
  }

  std::uint32_t distance_here(const PendingException& pending) const {
    // Frames popped between the raise and the current (catching) frame.
    return static_cast<std::uint32_t>(pending.stack_at_raise.size() - stack_.size());
  }

  bool take_step() {
    if (result_.steps_used >= budget_) return false;
    ++result_.steps_used;
    return true;
  }

  Flow call_method(const model::MethodRef& method, const model::MethodRef* caller) {
    if (stack_.size() >= kMaxCallDepth) {
      // Mirrors a VM stack overflow: raised at the call site, catchable.
      return raise(std::string(kStackOverflowType),
                   caller != nullptr ? *caller : method);
    }
    stack_.push_back(method);
    const MethodBody& body = program_.methods.at(method);
    Flow flow = run_block(body.statements, method, body, /*top_level=*/true);
    if (flow.kind == FlowKind::Exception && fo_.active_handlers.contains(method)) {
      const PendingException& pending = *flow.pending;
      result_.catch_events.push_back({pending.type, pending.raiser, method,
                                      distance_here(pending), model::HandlerKind::FoWrapper,
                                      next_seq()});
      flow = Flow::normal();  // silenced; the method returns normally
    }
    stack_.pop_back();
    return flow;
  }

  Flow run_block(const std::vector<Statement>& statements, const model::MethodRef& method,
                 const MethodBody& body, bool top_level) {
    for (std::uint32_t index = 0; index < statements.size(); ++index) {
      if (!take_step()) return Flow::exhausted();
      if (top_level) {
        for (const std::string& exception_type : body.declared_exceptions) {
          ++result_.reach_counts[{method, index, exception_type}];
        }
        if (injection_.active_point && injection_.active_point->method == method &&
            injection_.active_point->location == index) {
          const bool fire =
              injection_.fault_model == model::FaultModel::Always || !injected_;
          if (fire) {
            injected_ = true;
            result_.injection_stacks.push_back(
                {*injection_.active_point, snapshot(), next_seq()});
            return raise(injection_.active_point->exception_type, method);
          }
        }
      }
      Flow flow = run_statement(statements[index], method, body);
      if (flow.kind != FlowKind::Normal) return flow;
    }
    return Flow::normal();
  }

  Flow run_statement(const Statement& statement, const model::MethodRef& method,
                     const MethodBody& body) {
    if (const auto* emit = std::get_if<EmitStmt>(&statement.node)) {
      result_.emitted_trace.push_back(emit->token);
      return Flow::normal();
    }
    if (const auto* call = std::get_if<CallStmt>(&statement.node)) {
      return call_method(call->target, &method);
    }
    if (const auto* thr = std::get_if<ThrowStmt>(&statement.node)) {
      return raise(thr->exception_type, method);
    }
    if (const auto* try_stmt = std::get_if<TryStmt>(&statement.node)) {
      Flow flow = run_block(try_stmt->body, method, body, /*top_level=*/false);
      if (flow.kind != FlowKind::Exception) return flow;
      for (const CatchClause& clause : try_stmt->clauses) {
        if (!clause_matches(clause, flow.pending->type)) continue;
        const PendingException& pending = *flow.pending;
        result_.catch_events.push_back({pending.type, pending.raiser, method,
                                        distance_here(pending), model::HandlerKind::Manual,
                                        next_seq()});
        return run_block(clause.body, method, body, /*top_level=*/false);
      }
      return flow;  // no matching clause
    }
    if (const auto* loop = std::get_if<LoopStmt>(&statement.node)) {
      for (std::uint32_t i = 0; i < loop->count; ++i) {
        Flow flow = run_block(loop->body, method, body, /*top_level=*/false);
        if (flow.kind != FlowKind::Normal) return flow;
      }
      return Flow::normal();
    }
    // hang: burns the remaining budget deterministically
    result_.steps_used = budget_;
    return Flow::exhausted();
  }

  std::uint64_t next_seq() { return seq_++; }

  const ProgramModel& program_;
  const InjectionPlan& injection_;
  const FOPlan& fo_;
  std::uint64_t budget_;
  ExecutionResult result_;
  std::vector<model::MethodRef> stack_;  // caller first; snapshots reverse it
  bool injected_ = false;
  std::uint64_t seq_ = 0;
};

}  // namespace

ExecutionResult execute(const ProgramModel& program, const WorkloadSpec& workload,
                        const InjectionPlan& injection, const FOPlan& fo,
                        std::uint64_t step_budget) {
  if (step_budget == 0) throw UsageError("step_budget must be positive");
  if (injection.active_point) {
    const auto& point = *injection.active_point;
    auto it = program.methods.find(point.method);
    if (it == program.methods.end()) {
      throw UsageError("injection plan references unknown method '" +
                       point.method.identifier + "'");
    }
    if (point.location >= it->second.statements.size()) {
      throw UsageError("injection plan location out of range for '" +
                       point.method.identifier + "'");
    }
    const auto& declared = it->second.declared_exceptions;
    if (std::find(declared.begin(), declared.end(), point.exception_type) == declared.end()) {
      throw UsageError("injection plan exception '" + point.exception_type +
                       "' is not declared by '" + point.method.identifier + "'");
    }
  }
  for (const auto& handler : fo.active_handlers) {
    if (!program.methods.contains(handler)) {
      throw UsageError("FO plan references unknown method '" + handler.identifier + "'");
    }
  }
  validate_workload(program, workload);
  return Interpreter(program, injection, fo, step_budget).run(workload);
}

ExecutionResult baseline_trace(const ProgramModel& program, const WorkloadSpec& workload,
                               std::uint64_t step_budget) {
  return execute(program, workload, InjectionPlan{}, FOPlan{}, step_budget);
}

}  // namespace tripleagent::simprog
