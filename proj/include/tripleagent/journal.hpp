#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tripleagent/model.hpp"

namespace tripleagent::controller {

enum class Purpose { Classify, Discover, Assess };

enum class HealthStatus { Healthy, Restarted, Unrecoverable };

std::string_view to_token(Purpose p);
Purpose purpose_from_token(std::string_view token);
std::string_view to_token(HealthStatus h);
HealthStatus health_from_token(std::string_view token);

/// One experiment as persisted in the append-only journal: the plan that
/// was run, the verdict, and the monitoring summary later stages consume.
struct ExperimentRecord {
  std::uint64_t id = 0;
  Purpose purpose = Purpose::Classify;
  model::PerturbationPoint point;
  model::FaultModel fault_model = model::FaultModel::FirstHit;
  std::optional<model::MethodRef> fo_handler;

  model::OracleVerdict verdict;
  model::ExitKind exit = model::ExitKind::Normal;
  bool timed_out = false;

  std::uint64_t point_reaches = 0;
  std::uint64_t injection_count = 0;
  /// Call stack of the first injection, callee first.
  std::vector<model::MethodRef> injection_stack;

  struct CaughtInfo {
    model::MethodRef catcher;
    std::uint32_t distance = 0;
    model::HandlerKind kind = model::HandlerKind::Manual;

    bool operator==(const CaughtInfo&) const = default;
  };
  /// Where the injected exception was caught, if it was.
  std::optional<CaughtInfo> caught;

  /// Health-check outcome observed right after this experiment.
  std::optional<HealthStatus> post_health;
  std::optional<std::string> anomaly;
  double wall_ms = 0.0;

  /// Identity of the experiment within a campaign.
  struct Key {
    Purpose purpose;
    model::PerturbationPoint point;
    model::FaultModel fault_model;
    std::optional<model::MethodRef> fo_handler;

    auto operator<=>(const Key&) const = default;
  };
  Key key() const { return {purpose, point, fault_model, fo_handler}; }

  /// Equality on everything the campaign logic depends on; wall-clock time
  /// is measurement noise and excluded.
  bool same_outcome(const ExperimentRecord& other) const;
};

std::string serialize_record(const ExperimentRecord& record);
ExperimentRecord parse_record(const std::string& line);

/// Append-only experiment journal (one JSON record per line, preceded by a
/// header line carrying the journal version and the config fingerprint).
/// An interrupted campaign resumes by replaying it.
class Journal {
 public:
  /// Opens (creating if needed) the journal at `file`. An existing journal
  /// written under a different config fingerprint is rejected.
  Journal(std::filesystem::path file, std::string config_fingerprint);

  /// Records loaded from disk at construction.
  const std::vector<ExperimentRecord>& existing() const { return existing_; }

  /// Appends and flushes one record. Thread-safe.
  void append(const ExperimentRecord& record);

  std::uint64_t next_id();

 private:
  std::filesystem::path file_;
  std::string fingerprint_;
  std::vector<ExperimentRecord> existing_;
  std::ofstream out_;
  std::mutex mutex_;
  std::uint64_t next_id_ = 1;
};

}  // namespace tripleagent::controller
