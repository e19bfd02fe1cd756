#include "tripleagent/controller.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "tripleagent/subprocess.hpp"

namespace tripleagent::controller {

namespace {

using nlohmann::json;

json point_to_json(const model::PerturbationPoint& point) {
  return {{"method", point.method.identifier},
          {"location", point.location},
          {"exception", point.exception_type}};
}

model::PerturbationPoint point_from_json(const json& value) {
  model::PerturbationPoint point;
  point.method.identifier = value.at("method").get<std::string>();
  point.location = value.at("location").get<std::uint32_t>();
  point.exception_type = value.at("exception").get<std::string>();
  return point;
}

/// Methods between the raising frame (inclusive) and the given end frame
/// (exclusive), deduplicated keeping the first occurrence.
std::vector<model::MethodRef> candidate_frames(const std::vector<model::MethodRef>& stack,
                                               std::size_t end) {
  std::vector<model::MethodRef> out;
  for (std::size_t i = 0; i < end && i < stack.size(); ++i) {
    if (std::find(out.begin(), out.end(), stack[i]) == out.end()) {
      out.push_back(stack[i]);
    }
  }
  return out;
}

}  // namespace

model::PointCategory CampaignState::category_of(const model::PerturbationPoint& point) const {
  if (classification.fragile.contains(point)) return model::PointCategory::Fragile;
  if (classification.sensitive.contains(point)) return model::PointCategory::Sensitive;
  if (classification.immunized.contains(point)) return model::PointCategory::Immunized;
  return model::PointCategory::Unreached;
}

model::PointCategory CampaignState::best_achieved(const model::PerturbationPoint& point) const {
  model::PointCategory best = category_of(point);
  if (best == model::PointCategory::Unreached) return best;
  for (const auto& entry : validated) {
    if (entry.binding.point != point) continue;
    if (model::category_rank(entry.achieved) > model::category_rank(best)) {
      best = entry.achieved;
    }
  }
  return best;
}

std::uint64_t CampaignState::candidate_count(const model::PerturbationPoint& point) const {
  std::uint64_t count = 0;
  for (const auto& binding : candidates) {
    if (binding.point == point) ++count;
  }
  return count;
}

Campaign::Campaign(CampaignConfig config) : config_(std::move(config)) {
  fingerprint_ = config_fingerprint(config_);
  std::filesystem::create_directories(config_.out_dir);
  backend_ = make_backend(config_.target, config_.out_dir);
  journal_ = std::make_unique<Journal>(config_.out_dir / "journal.jsonl", fingerprint_);
  for (const auto& record : journal_->existing()) {
    const auto [it, inserted] = records_.emplace(record.key(), record);
    if (!inserted && !it->second.same_outcome(record)) {
      throw IntegrityError("journal contains conflicting results for experiment id " +
                           std::to_string(record.id) + " and id " +
                           std::to_string(it->second.id));
    }
  }
}

std::filesystem::path Campaign::detect_artifact_path() const {
  return config_.out_dir / "detect.json";
}

const DetectArtifact& Campaign::detect() {
  if (detect_) return *detect_;
  load_or_run_baseline();
  return *detect_;
}

void Campaign::load_or_run_baseline() {
  const auto path = detect_artifact_path();
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw IntegrityError("detect artifact is unreadable: " + std::string(e.what()));
    }
    if (!doc.contains("config_fingerprint") ||
        doc.at("config_fingerprint").get<std::string>() != fingerprint_) {
      throw IntegrityError(
          "detect artifact was written under a different configuration; refusing to resume");
    }
    DetectArtifact artifact;
    for (const json& entry : doc.at("points")) {
      model::PerturbationPoint point = point_from_json(entry);
      artifact.reaches[point] = entry.at("baseline_reaches").get<std::uint64_t>();
      artifact.points.push_back(std::move(point));
    }
    const json& baseline = doc.at("baseline");
    artifact.baseline_verdict.reason =
        model::verdict_reason_from_token(baseline.at("verdict").get<std::string>());
    artifact.baseline_exit = model::exit_kind_from_token(baseline.at("exit").get<std::string>());
    artifact.wall_ms = baseline.at("wall_ms").get<double>();
    if (!baseline.at("trace").is_null()) {
      artifact.trace = baseline.at("trace").get<std::vector<std::string>>();
    }
    detect_ = std::move(artifact);
    return;
  }

  if (backend_->health_check_and_restart() == HealthStatus::Unrecoverable) {
    throw CampaignAbort("target failed its health check before the baseline run");
  }
  RunObservation obs = backend_->run(simprog::InjectionPlan{}, simprog::FOPlan{},
                                     config_.step_budget, config_.oracle.timeout_ms, 0);
  ++new_executions_;
  const model::ExecutionView view{obs.exit, obs.timed_out, obs.launched,
                                  obs.trace ? &*obs.trace : nullptr};
  const model::OracleVerdict verdict =
      model::evaluate_oracle(view, config_.oracle, make_external_check());
  if (!verdict.passed()) {
    throw CampaignAbort(std::string("workload not green: the baseline run failed the oracle (") +
                        std::string(model::to_token(verdict.reason)) + ")");
  }

  DetectArtifact artifact;
  artifact.baseline_verdict = verdict;
  artifact.baseline_exit = obs.exit;
  artifact.wall_ms = obs.wall_ms;
  artifact.trace = obs.trace;
  const auto declared = backend_->declared_points(config_.filter);
  if (!declared.empty()) {
    artifact.points = declared;
  } else {
    // targets without static enumeration reveal their points through
    // baseline REACH records
    for (const auto& [point, count] : obs.reaches) {
      (void)count;
      if (config_.filter.empty() || point.method.identifier.starts_with(config_.filter)) {
        artifact.points.push_back(point);
      }
    }
    std::sort(artifact.points.begin(), artifact.points.end());
  }
  for (const auto& point : artifact.points) {
    artifact.reaches[point] = obs.reaches_of(point);
  }

  json doc;
  doc["artifact_version"] = 1;
  doc["config_fingerprint"] = fingerprint_;
  json points = json::array();
  for (const auto& point : artifact.points) {
    json entry = point_to_json(point);
    entry["baseline_reaches"] = artifact.reaches.at(point);
    points.push_back(std::move(entry));
  }
  doc["points"] = std::move(points);
  doc["baseline"] = {
      {"verdict", std::string(model::to_token(artifact.baseline_verdict.reason))},
      {"exit", std::string(model::to_token(artifact.baseline_exit))},
      {"wall_ms", artifact.wall_ms},
      {"trace", artifact.trace ? json(*artifact.trace) : json(nullptr)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());

  detect_ = std::move(artifact);
}

std::vector<model::PerturbationPoint> Campaign::reached_points() const {
  std::vector<model::PerturbationPoint> reached;
  for (const auto& point : detect_->points) {
    if (detect_->reaches.at(point) > 0) reached.push_back(point);
  }
  return reached;
}

const ExperimentRecord* Campaign::find_record(const ExperimentRecord::Key& key) const {
  const auto it = records_.find(key);
  return it == records_.end() ? nullptr : &it->second;
}

model::ExternalCheck Campaign::make_external_check() const {
  if (config_.oracle.domain != model::DomainCheck::ExternalCommand) return {};
  std::filesystem::path cwd = config_.out_dir;
  if (const auto* external = std::get_if<protocol::ExternalTarget>(&config_.target)) {
    cwd = external->working_dir;
  }
  const std::string command = config_.oracle.command;
  const std::uint32_t timeout_ms = config_.oracle.timeout_ms;
  return [command, cwd, timeout_ms]() {
    const auto result = subprocess::run_command(command, cwd, {}, timeout_ms);
    model::ExternalCheckResult out;
    out.ran = !result.not_executable();
    out.passed = out.ran && !result.timed_out && result.exit_code == 0;
    return out;
  };
}

ExperimentRecord Campaign::execute_planned(const Planned& planned, std::uint64_t id) {
  simprog::InjectionPlan injection;
  injection.active_point = planned.point;
  injection.fault_model = planned.fault_model;
  simprog::FOPlan fo;
  if (planned.fo_handler) fo.active_handlers.insert(*planned.fo_handler);

  RunObservation obs =
      backend_->run(injection, fo, config_.step_budget, config_.oracle.timeout_ms, id);
  ++new_executions_;

  const model::ExecutionView view{obs.exit, obs.timed_out, obs.launched,
                                  obs.trace ? &*obs.trace : nullptr};
  ExperimentRecord record;
  record.id = id;
  record.purpose = planned.purpose;
  record.point = planned.point;
  record.fault_model = planned.fault_model;
  record.fo_handler = planned.fo_handler;
  record.verdict = model::evaluate_oracle(view, config_.oracle, make_external_check());
  record.exit = obs.exit;
  record.timed_out = obs.timed_out;
  record.point_reaches = obs.reaches_of(planned.point);
  if (!obs.launched) {
    record.anomaly = "target launch failed; experiment not run";
  }

  bool seen_injection = false;
  for (const auto& event : obs.events) {
    if (const auto* inject = std::get_if<protocol::InjectRecord>(&event)) {
      if (inject->point != planned.point) continue;
      ++record.injection_count;
      if (!seen_injection) {
        record.injection_stack = inject->stack;
        seen_injection = true;
      }
    } else if (seen_injection && !record.caught) {
      const auto& caught = std::get<protocol::CatchRecord>(event);
      if (caught.exception_type == planned.point.exception_type &&
          caught.raiser == planned.point.method) {
        record.caught =
            ExperimentRecord::CaughtInfo{caught.catcher, caught.distance, caught.kind};
      }
    }
  }
  record.wall_ms = obs.wall_ms;
  return record;
}

const ExperimentRecord& Campaign::run_or_replay(const Planned& planned) {
  if (const ExperimentRecord* existing = find_record(planned.key())) return *existing;
  const std::uint64_t id = journal_->next_id();
  ExperimentRecord record = execute_planned(planned, id);
  if (record.verdict.reason == model::VerdictReason::NotRun) {
    warnings_.push_back("experiment " + std::to_string(id) + " could not be run (" +
                        planned.point.method.identifier + "@" +
                        std::to_string(planned.point.location) + ")");
  }
  if (!backend_->stateless()) {
    record.post_health = backend_->health_check_and_restart();
  }
  journal_->append(record);
  const auto [it, inserted] = records_.emplace(record.key(), record);
  if (!inserted) {
    throw IntegrityError("duplicate experiment key while appending id " +
                         std::to_string(record.id));
  }
  if (record.post_health == HealthStatus::Unrecoverable) {
    throw CampaignAbort("target unrecoverable after experiment " + std::to_string(record.id) +
                        "; partial state persisted");
  }
  return it->second;
}

void Campaign::run_batch(const std::vector<Planned>& planned) {
  std::vector<const Planned*> missing;
  for (const auto& entry : planned) {
    if (find_record(entry.key()) == nullptr) missing.push_back(&entry);
  }
  if (missing.empty()) return;
  if (!backend_->stateless() || config_.parallel <= 1) {
    for (const Planned* entry : missing) run_or_replay(*entry);
    return;
  }

  // stateless simulator: isolated workers, mutually exclusive journal writer
  const unsigned workers = std::min<unsigned>(config_.parallel,
                                              static_cast<unsigned>(missing.size()));
  std::vector<ExperimentRecord> results(missing.size());
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t index = cursor.fetch_add(1);
        if (index >= missing.size()) return;
        try {
          const std::uint64_t id = journal_->next_id();
          results[index] = execute_planned(*missing[index], id);
          journal_->append(results[index]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& thread : pool) thread.join();
  if (failure) std::rethrow_exception(failure);
  for (auto& record : results) {
    const auto [it, inserted] = records_.emplace(record.key(), record);
    if (!inserted) {
      throw IntegrityError("duplicate experiment key in parallel batch");
    }
    (void)it;
  }
}

const model::Classification& Campaign::classify() {
  if (classification_) return *classification_;
  detect();

  const auto reached = reached_points();
  std::vector<Planned> planned;
  planned.reserve(reached.size() * 2);
  for (const auto& point : reached) {
    planned.push_back({Purpose::Classify, point, model::FaultModel::FirstHit, std::nullopt});
    planned.push_back({Purpose::Classify, point, model::FaultModel::Always, std::nullopt});
  }
  run_batch(planned);

  model::Classification classification;
  for (const auto& point : detect_->points) {
    if (detect_->reaches.at(point) == 0) {
      classification.unreached.insert(point);
      continue;
    }
    const ExperimentRecord* first =
        find_record({Purpose::Classify, point, model::FaultModel::FirstHit, std::nullopt});
    const ExperimentRecord* always =
        find_record({Purpose::Classify, point, model::FaultModel::Always, std::nullopt});
    if (first == nullptr || always == nullptr) {
      throw IntegrityError("classification experiments missing for " +
                           point.method.identifier + "@" + std::to_string(point.location));
    }
    if (first->verdict.reason == model::VerdictReason::NotRun ||
        always->verdict.reason == model::VerdictReason::NotRun) {
      throw CampaignAbort("classification experiment for " + point.method.identifier + "@" +
                          std::to_string(point.location) +
                          " could not be run; aborting (partial state persisted)");
    }
    const model::ClassifyOutcome outcome = model::classify(first->verdict, always->verdict);
    switch (outcome.category) {
      case model::PointCategory::Fragile:
        classification.fragile.insert(point);
        break;
      case model::PointCategory::Sensitive:
        classification.sensitive.insert(point);
        break;
      case model::PointCategory::Immunized:
        classification.immunized.insert(point);
        break;
      case model::PointCategory::Unreached:
        break;
    }
    if (outcome.anomaly) {
      anomalies_.push_back({point, "classification",
                            "single injection unacceptable but continuous injection acceptable; "
                            "classified FRAGILE"});
    }
  }
  classification_ = std::move(classification);
  return *classification_;
}

const std::vector<model::CandidateBinding>& Campaign::discover() {
  if (candidates_) return *candidates_;
  classify();

  std::vector<model::CandidateBinding> candidates;
  for (const auto& point : reached_points()) {
    const ExperimentRecord* record =
        find_record({Purpose::Classify, point, model::FaultModel::FirstHit, std::nullopt});
    if (record->injection_count == 0) {
      // classification stack unavailable; one dedicated first-hit run
      record = &run_or_replay({Purpose::Discover, point, model::FaultModel::FirstHit,
                               std::nullopt});
    }
    default_handlers_[point] = std::nullopt;
    if (record->injection_count == 0) {
      anomalies_.push_back(
          {point, "no-injection", "point was reached in the baseline but never injected"});
      continue;
    }
    const auto& stack = record->injection_stack;
    std::vector<model::MethodRef> frames;
    if (record->caught && record->caught->kind == model::HandlerKind::Manual) {
      default_handlers_[point] = record->caught->catcher;
      frames = candidate_frames(stack, record->caught->distance);
    } else if (record->caught) {
      anomalies_.push_back({point, "discovery",
                            "injected exception reported as wrapper-caught with no active "
                            "failure-oblivious method"});
      continue;
    } else if (record->exit == model::ExitKind::Crash) {
      frames = candidate_frames(stack, stack.size());
    } else {
      anomalies_.push_back({point, "discovery",
                            "injected exception neither caught nor fatal; stack unusable"});
      continue;
    }
    for (const auto& method : frames) {
      candidates.push_back({point, method});
    }
  }
  candidates_ = std::move(candidates);
  return *candidates_;
}

const std::vector<ValidatedBinding>& Campaign::assess() {
  if (validated_) return *validated_;
  discover();

  if (backend_->stateless() && config_.parallel > 1) {
    std::vector<Planned> planned;
    planned.reserve(candidates_->size() * 2);
    for (const auto& binding : *candidates_) {
      planned.push_back(
          {Purpose::Assess, binding.point, model::FaultModel::FirstHit, binding.handler});
      planned.push_back(
          {Purpose::Assess, binding.point, model::FaultModel::Always, binding.handler});
    }
    run_batch(planned);
  }

  std::vector<ValidatedBinding> validated;
  std::set<model::PerturbationPoint> excluded;
  for (const auto& binding : *candidates_) {
    if (excluded.contains(binding.point)) continue;
    const model::PointCategory original = [&]() {
      if (classification_->fragile.contains(binding.point)) return model::PointCategory::Fragile;
      if (classification_->sensitive.contains(binding.point)) {
        return model::PointCategory::Sensitive;
      }
      return model::PointCategory::Immunized;
    }();

    const ExperimentRecord& first = run_or_replay(
        {Purpose::Assess, binding.point, model::FaultModel::FirstHit, binding.handler});
    if (first.post_health == HealthStatus::Restarted) {
      anomalies_.push_back({binding.point, "health-exclusion",
                            "wrapper on " + binding.handler.identifier +
                                " corrupted the target; restarted, binding rejected and point "
                                "excluded from later experiments"});
      excluded.insert(binding.point);
      continue;
    }
    if (first.verdict.reason == model::VerdictReason::NotRun) {
      anomalies_.push_back({binding.point, "not-run",
                            "assessment of " + binding.handler.identifier + " could not be run"});
      continue;
    }

    const ExperimentRecord& always = run_or_replay(
        {Purpose::Assess, binding.point, model::FaultModel::Always, binding.handler});
    if (always.post_health == HealthStatus::Restarted) {
      anomalies_.push_back({binding.point, "health-exclusion",
                            "wrapper on " + binding.handler.identifier +
                                " corrupted the target; restarted, binding rejected and point "
                                "excluded from later experiments"});
      excluded.insert(binding.point);
      continue;
    }
    if (always.verdict.reason == model::VerdictReason::NotRun) {
      anomalies_.push_back({binding.point, "not-run",
                            "assessment of " + binding.handler.identifier + " could not be run"});
      continue;
    }

    const model::ClassifyOutcome outcome = model::classify(first.verdict, always.verdict);
    if (outcome.anomaly) {
      anomalies_.push_back({binding.point, "assessment",
                            "anomalous verdict pair while assessing " +
                                binding.handler.identifier});
    }
    const model::BindingStatus status = model::binding_status(original, outcome.category);
    if (status != model::BindingStatus::NoEffect) {
      validated.push_back({binding, outcome.category, status});
    }
  }
  validated_ = std::move(validated);
  return *validated_;
}

const CampaignState& Campaign::state() {
  if (state_) return *state_;
  assess();

  CampaignState state;
  state.points = detect_->points;
  state.baseline_reaches = detect_->reaches;
  state.classification = *classification_;
  state.candidates = *candidates_;
  state.default_handlers = default_handlers_;
  state.validated = *validated_;
  state.anomalies = anomalies_;
  std::sort(state.anomalies.begin(), state.anomalies.end());
  state.executions_total = records_.size() + 1;  // experiments plus the baseline
  state.baseline_wall_ms = detect_->wall_ms;
  // wrappers are always present and inert when inactive, so the baseline
  // run is the instrumented-inactive measurement
  state.instrumented_inactive_wall_ms = detect_->wall_ms;
  state_ = std::move(state);
  return *state_;
}

}  // namespace tripleagent::controller
