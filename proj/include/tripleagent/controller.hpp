#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tripleagent/backend.hpp"
#include "tripleagent/config.hpp"
#include "tripleagent/journal.hpp"
#include "tripleagent/model.hpp"

namespace tripleagent::controller {

/// Anything the pipeline wants surfaced in its own report section instead
/// of silently folding into a category.
struct Anomaly {
  model::PerturbationPoint point;
  std::string kind;
  std::string detail;

  auto operator<=>(const Anomaly&) const = default;
};

struct ValidatedBinding {
  model::CandidateBinding binding;
  model::PointCategory achieved = model::PointCategory::Fragile;
  model::BindingStatus status = model::BindingStatus::NoEffect;

  auto operator<=>(const ValidatedBinding&) const = default;
};

/// Detection output: the point set and the baseline observations.
struct DetectArtifact {
  std::vector<model::PerturbationPoint> points;  // sorted (method, location, exception)
  std::map<model::PerturbationPoint, std::uint64_t> reaches;
  model::OracleVerdict baseline_verdict;
  model::ExitKind baseline_exit = model::ExitKind::Normal;
  double wall_ms = 0.0;
  std::optional<std::vector<std::string>> trace;

  bool operator==(const DetectArtifact&) const = default;
};

/// Everything a finished (or resumed-to-consistent) campaign knows.
struct CampaignState {
  std::vector<model::PerturbationPoint> points;
  std::map<model::PerturbationPoint, std::uint64_t> baseline_reaches;
  model::Classification classification;
  /// Candidate set Q in assessment order: points sorted, then stack order.
  std::vector<model::CandidateBinding> candidates;
  /// Method holding the manual catch that handled the injected exception,
  /// or nullopt when it crashed through (or the point was never injected).
  std::map<model::PerturbationPoint, std::optional<model::MethodRef>> default_handlers;
  /// Validated set R.
  std::vector<ValidatedBinding> validated;
  std::vector<Anomaly> anomalies;
  /// Workload executions accounted for by the journal plus the baseline.
  std::uint64_t executions_total = 0;
  double baseline_wall_ms = 0.0;
  double instrumented_inactive_wall_ms = 0.0;

  model::PointCategory category_of(const model::PerturbationPoint& point) const;
  /// Original category joined with every validated achievement.
  model::PointCategory best_achieved(const model::PerturbationPoint& point) const;
  std::uint64_t candidate_count(const model::PerturbationPoint& point) const;
};

/// Orchestrates detection, classification, candidate discovery and
/// assessment over one target, persisting every experiment into the
/// journal so any stage can resume without re-executing work.
class Campaign {
 public:
  explicit Campaign(CampaignConfig config);

  const DetectArtifact& detect();
  const model::Classification& classify();
  const std::vector<model::CandidateBinding>& discover();
  const std::vector<ValidatedBinding>& assess();
  const CampaignState& state();

  /// Workload executions performed by this instance (as opposed to
  /// replayed from the journal).
  std::uint64_t new_executions() const { return new_executions_.load(); }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const CampaignConfig& config() const { return config_; }

 private:
  struct Planned {
    Purpose purpose = Purpose::Classify;
    model::PerturbationPoint point;
    model::FaultModel fault_model = model::FaultModel::FirstHit;
    std::optional<model::MethodRef> fo_handler;

    ExperimentRecord::Key key() const { return {purpose, point, fault_model, fo_handler}; }
  };

  std::filesystem::path detect_artifact_path() const;
  void load_or_run_baseline();
  const ExperimentRecord* find_record(const ExperimentRecord::Key& key) const;
  const ExperimentRecord& run_or_replay(const Planned& planned);
  ExperimentRecord execute_planned(const Planned& planned, std::uint64_t id);
  void run_batch(const std::vector<Planned>& planned);
  std::vector<model::PerturbationPoint> reached_points() const;
  model::ExternalCheck make_external_check() const;

  CampaignConfig config_;
  std::string fingerprint_;
  std::unique_ptr<TargetBackend> backend_;
  std::unique_ptr<Journal> journal_;
  std::map<ExperimentRecord::Key, ExperimentRecord> records_;

  std::optional<DetectArtifact> detect_;
  std::optional<model::Classification> classification_;
  std::optional<std::vector<model::CandidateBinding>> candidates_;
  std::map<model::PerturbationPoint, std::optional<model::MethodRef>> default_handlers_;
  std::optional<std::vector<ValidatedBinding>> validated_;
  std::optional<CampaignState> state_;

  std::vector<Anomaly> anomalies_;
  std::vector<std::string> warnings_;
  std::atomic<std::uint64_t> new_executions_ = 0;
};

}  // namespace tripleagent::controller
