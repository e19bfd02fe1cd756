#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tripleagent/model.hpp"
#include "tripleagent/simprog.hpp"

namespace tripleagent::protocol {

/// Environment variables the controller exports to external targets.
inline constexpr const char* kConfigEnvVar = "TRIPLEAGENT_CONFIG";
inline constexpr const char* kLogEnvVar = "TRIPLEAGENT_LOG";

/// Everything an agent needs for one experiment, serialized to the
/// line-oriented activation grammar:
///
///   TRIPLEAGENT 1
///   POINT <method> <location> <exception> <FIRST_HIT|ALWAYS>   (0 or 1)
///   FO <method>                                                (0..n, sorted)
///   BUDGET <steps> <timeout_ms>
struct ActivationFile {
  simprog::InjectionPlan plan;
  simprog::FOPlan fo;
  std::uint64_t step_budget = 100'000;
  std::uint32_t timeout_ms = 60'000;

  bool operator==(const ActivationFile&) const = default;
};

std::string serialize_activation(const ActivationFile& activation);
ActivationFile parse_activation(const std::string& text);
ActivationFile load_activation(const std::filesystem::path& file);

/// Writes the canonical serialization and fsyncs it so the file is on disk
/// before the target launches. Throws IoError on failure.
void write_activation(const ActivationFile& activation, const std::filesystem::path& file);

struct ReachRecord {
  model::PerturbationPoint point;
  std::uint64_t count = 0;

  bool operator==(const ReachRecord&) const = default;
};

struct InjectRecord {
  model::PerturbationPoint point;
  std::vector<model::MethodRef> stack;  // callee first, semicolon-joined on disk

  bool operator==(const InjectRecord&) const = default;
};

struct CatchRecord {
  std::string exception_type;
  model::MethodRef raiser;
  model::MethodRef catcher;
  std::uint32_t distance = 0;
  model::HandlerKind kind = model::HandlerKind::Manual;

  bool operator==(const CatchRecord&) const = default;
};

/// Parsed monitor log. Record order is preserved exactly as found in the
/// file; a log without a terminating EXIT record is incomplete and reports
/// a CRASH exit (the controller upgrades that to FREEZE when it observed a
/// timeout itself).
struct MonitorLog {
  using Record = std::variant<ReachRecord, InjectRecord, CatchRecord>;

  std::vector<Record> records;
  bool complete = false;
  model::ExitKind exit = model::ExitKind::Crash;

  bool operator==(const MonitorLog&) const = default;
};

/// Serializes records in stored order, appending the EXIT line when the
/// log is complete. parse(serialize(x)) == x, and serialize(parse(text))
/// reproduces well-formed text byte for byte.
std::string serialize_monitor_log(const MonitorLog& log);

/// Strict line parser. A malformed or partial final line is treated as
/// truncation (incomplete log); a malformed interior line is a ParseError
/// naming the line number.
MonitorLog parse_monitor_log_text(const std::string& text);
MonitorLog load_monitor_log(const std::filesystem::path& file);

/// Frames between the first occurrence of `raiser` and the first
/// occurrence of `catcher` in a callee-first stack; 0 when they share a
/// frame. Throws UsageError when either method is absent.
std::uint32_t stack_distance(std::span<const model::MethodRef> stack,
                             const model::MethodRef& raiser, const model::MethodRef& catcher);

/// Renders an in-process execution as the log an external agent would have
/// written: INJECT/CATCH events in monitored order, one REACH per declared
/// point (zero counts included), then EXIT. A hang has no EXIT
/// representation and yields an incomplete log, like a frozen target.
MonitorLog log_from_execution(const simprog::ExecutionResult& execution,
                              std::span<const model::PerturbationPoint> declared_points);

/// How the controller drives a target.
struct SimulatorTarget {
  std::filesystem::path program_file;
  std::filesystem::path workload_file;
};

struct ExternalTarget {
  std::string launch_command;
  std::string health_check_command;
  std::string restart_command;
  std::filesystem::path working_dir;
};

using TargetDescriptor = std::variant<SimulatorTarget, ExternalTarget>;

}  // namespace tripleagent::protocol
