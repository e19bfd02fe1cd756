#include "tripleagent/backend.hpp"

#include <chrono>
#include <cstdio>

#include "tripleagent/subprocess.hpp"

namespace tripleagent::controller {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

RunObservation observe_execution(const simprog::ExecutionResult& execution,
                                 std::span<const model::PerturbationPoint> declared_points) {
  RunObservation obs;
  obs.exit = execution.exit;
  obs.trace = execution.emitted_trace;
  std::size_t next_injection = 0;
  std::size_t next_catch = 0;
  while (next_injection < execution.injection_stacks.size() ||
         next_catch < execution.catch_events.size()) {
    const bool take_injection =
        next_catch >= execution.catch_events.size() ||
        (next_injection < execution.injection_stacks.size() &&
         execution.injection_stacks[next_injection].seq < execution.catch_events[next_catch].seq);
    if (take_injection) {
      const auto& injection = execution.injection_stacks[next_injection++];
      obs.events.emplace_back(protocol::InjectRecord{injection.point, injection.stack});
    } else {
      const auto& caught = execution.catch_events[next_catch++];
      obs.events.emplace_back(protocol::CatchRecord{caught.exception_type, caught.raiser,
                                                    caught.catcher, caught.stack_distance,
                                                    caught.kind});
    }
  }
  for (const auto& point : declared_points) {
    const auto it = execution.reach_counts.find(point);
    obs.reaches[point] = it == execution.reach_counts.end() ? 0 : it->second;
  }
  return obs;
}

RunObservation observe_log(const protocol::MonitorLog& log, bool timed_out) {
  RunObservation obs;
  obs.timed_out = timed_out;
  obs.log_complete = log.complete;
  obs.exit = log.complete ? log.exit : model::ExitKind::Crash;
  for (const auto& record : log.records) {
    if (const auto* reach = std::get_if<protocol::ReachRecord>(&record)) {
      obs.reaches[reach->point] += reach->count;
    } else if (const auto* inject = std::get_if<protocol::InjectRecord>(&record)) {
      obs.events.emplace_back(*inject);
    } else if (const auto* caught = std::get_if<protocol::CatchRecord>(&record)) {
      obs.events.emplace_back(*caught);
    }
  }
  return obs;
}

SimulatorBackend::SimulatorBackend(simprog::ProgramModel program, simprog::WorkloadSpec workload)
    : program_(std::move(program)), workload_(std::move(workload)) {
  simprog::validate_workload(program_, workload_);
  all_points_ = simprog::enumerate_points(program_);
}

RunObservation SimulatorBackend::run(const simprog::InjectionPlan& injection,
                                     const simprog::FOPlan& fo, std::uint64_t step_budget,
                                     std::uint32_t, std::uint64_t) {
  const auto start = std::chrono::steady_clock::now();
  const simprog::ExecutionResult execution =
      simprog::execute(program_, workload_, injection, fo, step_budget);
  RunObservation obs = observe_execution(execution, all_points_);
  obs.wall_ms = elapsed_ms(start);
  return obs;
}

std::vector<model::PerturbationPoint> SimulatorBackend::declared_points(std::string_view filter) {
  return simprog::enumerate_points(program_, filter);
}

ExternalBackend::ExternalBackend(protocol::ExternalTarget target,
                                 std::filesystem::path experiments_dir)
    : target_(std::move(target)), experiments_dir_(std::move(experiments_dir)) {
  std::filesystem::create_directories(experiments_dir_);
}

RunObservation ExternalBackend::run(const simprog::InjectionPlan& injection,
                                    const simprog::FOPlan& fo, std::uint64_t step_budget,
                                    std::uint32_t timeout_ms,
                                    std::uint64_t experiment_ordinal) {
  char name[32];
  std::snprintf(name, sizeof(name), "exp_%06llu",
                static_cast<unsigned long long>(experiment_ordinal));
  const std::filesystem::path exp_dir = experiments_dir_ / name;
  std::filesystem::create_directories(exp_dir);

  const std::filesystem::path activation_path = exp_dir / "activation.txt";
  const std::filesystem::path log_path = exp_dir / "monitor.log";
  std::filesystem::remove(log_path);

  protocol::ActivationFile activation{injection, fo, step_budget, timeout_ms};
  protocol::write_activation(activation, activation_path);

  const auto start = std::chrono::steady_clock::now();
  const auto command = subprocess::run_command(
      target_.launch_command, target_.working_dir,
      {{protocol::kConfigEnvVar, std::filesystem::absolute(activation_path).string()},
       {protocol::kLogEnvVar, std::filesystem::absolute(log_path).string()}},
      timeout_ms, exp_dir / "stdout.txt", exp_dir / "stderr.txt");

  RunObservation obs;
  if (command.not_executable()) {
    obs.launched = false;
    obs.exit = model::ExitKind::Crash;
    obs.wall_ms = elapsed_ms(start);
    return obs;
  }
  protocol::MonitorLog log;
  if (std::filesystem::exists(log_path)) {
    log = protocol::load_monitor_log(log_path);
  }
  obs = observe_log(log, command.timed_out);
  obs.wall_ms = elapsed_ms(start);
  return obs;
}

HealthStatus ExternalBackend::health_check_and_restart() {
  // all agents off: the commands run without the protocol environment
  const std::uint32_t timeout_ms = 60'000;
  const auto check =
      subprocess::run_command(target_.health_check_command, target_.working_dir, {}, timeout_ms);
  if (!check.not_executable() && !check.timed_out && check.exit_code == 0) {
    return HealthStatus::Healthy;
  }
  const auto restart =
      subprocess::run_command(target_.restart_command, target_.working_dir, {}, timeout_ms);
  if (restart.not_executable() || restart.timed_out || restart.exit_code != 0) {
    return HealthStatus::Unrecoverable;
  }
  const auto recheck =
      subprocess::run_command(target_.health_check_command, target_.working_dir, {}, timeout_ms);
  if (!recheck.not_executable() && !recheck.timed_out && recheck.exit_code == 0) {
    return HealthStatus::Restarted;
  }
  return HealthStatus::Unrecoverable;
}

std::unique_ptr<TargetBackend> make_backend(const protocol::TargetDescriptor& target,
                                            const std::filesystem::path& out_dir) {
  if (const auto* sim = std::get_if<protocol::SimulatorTarget>(&target)) {
    return std::make_unique<SimulatorBackend>(simprog::load_program(sim->program_file),
                                              simprog::load_workload(sim->workload_file));
  }
  return std::make_unique<ExternalBackend>(std::get<protocol::ExternalTarget>(target),
                                           out_dir / "experiments");
}

}  // namespace tripleagent::controller
