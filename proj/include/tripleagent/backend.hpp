#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "tripleagent/journal.hpp"
#include "tripleagent/model.hpp"
#include "tripleagent/protocol.hpp"
#include "tripleagent/simprog.hpp"

namespace tripleagent::controller {

/// Monitored event stream of one run, in chronological order.
using MonitorEvent = std::variant<protocol::InjectRecord, protocol::CatchRecord>;

/// Backend-independent view of one workload execution: what the agents
/// observed plus how the run ended. Parsed from a monitor log for external
/// targets, built directly from the interpreter otherwise.
struct RunObservation {
  bool launched = true;
  model::ExitKind exit = model::ExitKind::Normal;
  bool timed_out = false;
  bool log_complete = true;
  std::optional<std::vector<std::string>> trace;
  std::vector<MonitorEvent> events;
  std::map<model::PerturbationPoint, std::uint64_t> reaches;
  double wall_ms = 0.0;

  std::uint64_t reaches_of(const model::PerturbationPoint& point) const {
    const auto it = reaches.find(point);
    return it == reaches.end() ? 0 : it->second;
  }
};

/// Drives one target program through experiments.
class TargetBackend {
 public:
  virtual ~TargetBackend() = default;

  /// Runs the workload once under the given plans.
  virtual RunObservation run(const simprog::InjectionPlan& injection, const simprog::FOPlan& fo,
                             std::uint64_t step_budget, std::uint32_t timeout_ms,
                             std::uint64_t experiment_ordinal) = 0;

  /// Verifies the environment between experiments, restarting on failure.
  virtual HealthStatus health_check_and_restart() = 0;

  /// Points the target declares, independent of any run. Empty for targets
  /// that only reveal their points through baseline REACH records.
  virtual std::vector<model::PerturbationPoint> declared_points(std::string_view filter) = 0;

  /// True when runs are isolated and side-effect free (parallelizable).
  virtual bool stateless() const = 0;
};

/// In-process interpretation of a simulator program.
class SimulatorBackend : public TargetBackend {
 public:
  SimulatorBackend(simprog::ProgramModel program, simprog::WorkloadSpec workload);

  RunObservation run(const simprog::InjectionPlan& injection, const simprog::FOPlan& fo,
                     std::uint64_t step_budget, std::uint32_t timeout_ms,
                     std::uint64_t experiment_ordinal) override;
  HealthStatus health_check_and_restart() override { return HealthStatus::Healthy; }
  std::vector<model::PerturbationPoint> declared_points(std::string_view filter) override;
  bool stateless() const override { return true; }

  const simprog::ProgramModel& program() const { return program_; }
  const simprog::WorkloadSpec& workload() const { return workload_; }

 private:
  simprog::ProgramModel program_;
  simprog::WorkloadSpec workload_;
  std::vector<model::PerturbationPoint> all_points_;
};

/// Out-of-process target driven through the file protocol: one directory
/// per experiment holding the activation file and the monitor log.
class ExternalBackend : public TargetBackend {
 public:
  ExternalBackend(protocol::ExternalTarget target, std::filesystem::path experiments_dir);

  RunObservation run(const simprog::InjectionPlan& injection, const simprog::FOPlan& fo,
                     std::uint64_t step_budget, std::uint32_t timeout_ms,
                     std::uint64_t experiment_ordinal) override;
  HealthStatus health_check_and_restart() override;
  std::vector<model::PerturbationPoint> declared_points(std::string_view) override {
    return {};
  }
  bool stateless() const override { return false; }

 private:
  protocol::ExternalTarget target_;
  std::filesystem::path experiments_dir_;
};

/// Converts an interpreter result into the common observation shape.
/// `declared_points` fixes the REACH universe (zero counts included) so the
/// in-process view matches what a monitor log of the same run would parse
/// to.
RunObservation observe_execution(const simprog::ExecutionResult& execution,
                                 std::span<const model::PerturbationPoint> declared_points);

/// Builds the same observation from a parsed monitor log.
RunObservation observe_log(const protocol::MonitorLog& log, bool timed_out);

std::unique_ptr<TargetBackend> make_backend(const protocol::TargetDescriptor& target,
                                            const std::filesystem::path& out_dir);

}  // namespace tripleagent::controller
