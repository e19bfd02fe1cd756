#include <doctest.h>

#include <fstream>

#include "brute_force.hpp"
#include "fake_target.hpp"
#include "generator.hpp"
#include "reference_interp.hpp"
#include "temp_dir.hpp"
#include "tripleagent/controller.hpp"
#include "tripleagent/report.hpp"

using namespace tripleagent;
using controller::Campaign;
using controller::CampaignConfig;
using testsupport::TempDir;

namespace {

model::MethodRef ref(const char* name) { return model::MethodRef{name}; }

constexpr const char* kChainProgram = R"({
  "format_version": 1,
  "entry": "main",
  "methods": {
    "main": {"throws": [], "body": [{"call": "m2"}, {"emit": "done"}]},
    "m2": {"throws": [], "body": [
      {"try": [{"call": "m1"}],
       "catch": [{"types": ["IOException"], "body": [{"emit": "recovered"}]}]}
    ]},
    "m1": {"throws": [], "body": [{"call": "m0"}]},
    "m0": {"throws": ["IOException"], "body": [{"emit": "payload"}]}
  }
})";

constexpr const char* kSingleWorkload = R"({
  "format_version": 1,
  "invocations": [{"method": "main", "repeat": 1}]
})";

CampaignConfig sim_config(const TempDir& dir, const std::string& program,
                          const std::string& workload, model::AcceptabilityOracle oracle,
                          const std::string& out_name = "out") {
  CampaignConfig config;
  config.target = protocol::SimulatorTarget{dir.write("program.json", program),
                                            dir.write("workload.json", workload)};
  config.oracle = std::move(oracle);
  config.step_budget = 5000;
  config.out_dir = dir.path() / out_name;
  return config;
}

model::AcceptabilityOracle contains_oracle(std::vector<std::string> expected) {
  model::AcceptabilityOracle oracle;
  oracle.domain = model::DomainCheck::TraceContains;
  oracle.expected_trace = std::move(expected);
  return oracle;
}

std::vector<controller::ExperimentRecord> read_journal(const std::filesystem::path& file) {
  std::ifstream in(file);
  REQUIRE(in);
  std::vector<controller::ExperimentRecord> records;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    records.push_back(controller::parse_record(line));
  }
  return records;
}

report::Report normalized_report(Campaign& campaign) {
  report::Report rpt = report::build_report(campaign.state());
  rpt.baseline_wall_ms = 0;
  rpt.instrumented_inactive_wall_ms = 0;
  rpt.overhead_percent = 0;
  return rpt;
}

}  // namespace

TEST_CASE("chain fixture: full campaign in process") {
  TempDir dir("campaign_chain");
  Campaign campaign(sim_config(dir, kChainProgram, kSingleWorkload, contains_oracle({"done"})));

  const auto& detect = campaign.detect();
  const model::PerturbationPoint point{ref("m0"), 0, "IOException"};
  REQUIRE(detect.points == std::vector<model::PerturbationPoint>{point});
  CHECK(detect.reaches.at(point) == 1);
  CHECK(detect.baseline_verdict.passed());

  const auto& classification = campaign.classify();
  CHECK(classification.immunized.contains(point));
  CHECK(classification.fragile.empty());

  const auto& candidates = campaign.discover();
  REQUIRE(candidates.size() == 2);
  CHECK(candidates[0] == model::CandidateBinding{point, ref("m0")});
  CHECK(candidates[1] == model::CandidateBinding{point, ref("m1")});

  const auto& validated = campaign.assess();
  REQUIRE(validated.size() == 2);
  for (const auto& entry : validated) {
    CHECK(entry.achieved == model::PointCategory::Immunized);
    CHECK(entry.status == model::BindingStatus::AlternativeResilient);
  }
  CHECK(validated[1].binding.handler == ref("m1"));

  const auto& state = campaign.state();
  CHECK(state.default_handlers.at(point) == ref("m2"));
  CHECK(state.executions_total == 7);  // baseline + 2 classify + 4 assess
  CHECK(campaign.new_executions() == 7);
  CHECK(state.anomalies.empty());
}

TEST_CASE("a finished journal replays with zero executions and identical output") {
  TempDir dir("campaign_resume");
  const auto config =
      sim_config(dir, kChainProgram, kSingleWorkload, contains_oracle({"done"}));

  report::Report first;
  {
    Campaign campaign(config);
    first = normalized_report(campaign);
    CHECK(campaign.new_executions() == 7);
  }
  {
    Campaign campaign(config);
    const report::Report second = normalized_report(campaign);
    CHECK(campaign.new_executions() == 0);
    CHECK(second == first);
  }
}

TEST_CASE("identical campaigns persist identical results") {
  TempDir dir_a("campaign_det_a");
  TempDir dir_b("campaign_det_b");
  {
    Campaign a(sim_config(dir_a, kChainProgram, kSingleWorkload, contains_oracle({"done"})));
    a.state();
    Campaign b(sim_config(dir_b, kChainProgram, kSingleWorkload, contains_oracle({"done"})));
    b.state();
  }
  const auto journal_a = read_journal(dir_a.path() / "out" / "journal.jsonl");
  const auto journal_b = read_journal(dir_b.path() / "out" / "journal.jsonl");
  REQUIRE(journal_a.size() == journal_b.size());
  for (std::size_t i = 0; i < journal_a.size(); ++i) {
    CHECK(journal_a[i].same_outcome(journal_b[i]));  // wall clock aside
    CHECK(journal_a[i].id == journal_b[i].id);
  }
}

TEST_CASE("dead code is reported unreached, not classified") {
  TempDir dir("campaign_unreached");
  const std::string program = R"({
    "format_version": 1,
    "entry": "main",
    "methods": {
      "main": {"throws": [], "body": [{"emit": "done"}]},
      "dead": {"throws": ["E1"], "body": [{"emit": "never"}]}
    }
  })";
  Campaign campaign(sim_config(dir, program, kSingleWorkload, contains_oracle({"done"})));
  const auto& classification = campaign.classify();
  const model::PerturbationPoint dead_point{ref("dead"), 0, "E1"};
  CHECK(classification.unreached.contains(dead_point));
  CHECK(campaign.discover().empty());
  const auto& state = campaign.state();
  CHECK(state.executions_total == 1);  // baseline only
  CHECK(state.candidate_count(dead_point) == 0);
}

TEST_CASE("a red baseline aborts the campaign") {
  TempDir dir("campaign_red");
  const std::string program = R"({
    "format_version": 1,
    "entry": "main",
    "methods": {"main": {"throws": [], "body": [{"throw": "Boom"}]}}
  })";
  Campaign campaign(sim_config(dir, program, kSingleWorkload, contains_oracle({})));
  CHECK_THROWS_WITH_AS(campaign.detect(),
                       doctest::Contains("workload not green"), CampaignAbort);
}

TEST_CASE("freeze fixture: hang classifies through FREEZE and still improves") {
  TempDir dir("campaign_freeze");
  const std::string program = R"({
    "format_version": 1,
    "entry": "main",
    "methods": {
      "main": {"throws": [], "body": [
        {"try": [{"call": "serve"}],
         "catch": [{"types": ["IOException"], "body": [{"hang": true}]}]},
        {"emit": "served"}
      ]},
      "serve": {"throws": ["IOException"], "body": [{"emit": "tick"}]}
    }
  })";
  Campaign campaign(sim_config(dir, program, kSingleWorkload, contains_oracle({"served"})));
  const model::PerturbationPoint point{ref("serve"), 0, "IOException"};

  const auto& classification = campaign.classify();
  CHECK(classification.fragile.contains(point));

  const auto& validated = campaign.assess();
  REQUIRE(validated.size() == 1);
  CHECK(validated[0].binding == model::CandidateBinding{point, ref("serve")});
  CHECK(validated[0].achieved == model::PointCategory::Immunized);
  CHECK(validated[0].status == model::BindingStatus::ValidatedImprovement);

  // both classification verdicts came from the freeze rule, within budget
  for (const auto& record : read_journal(campaign.config().out_dir / "journal.jsonl")) {
    if (record.purpose == controller::Purpose::Classify) {
      CHECK(record.verdict.reason == model::VerdictReason::Freeze);
      CHECK(record.exit == model::ExitKind::Hang);
    }
  }

  // the lone fragile point has a validating binding, so cell a empties out
  const auto rpt = report::build_report(campaign.state());
  CHECK(rpt.matrix[static_cast<std::size_t>(model::TransitionCell::A)] == 0);
  CHECK(rpt.matrix[static_cast<std::size_t>(model::TransitionCell::C)] == 1);
}

TEST_CASE("parallel simulator workers reproduce the sequential campaign") {
  // pick seeds whose baseline is green and which actually have points
  int tested = 0;
  for (std::uint64_t seed = 100; seed < 200 && tested < 3; ++seed) {
    const auto generated = testsupport::random_case(seed);
    const auto reference =
        testsupport::reference_run(generated.program, generated.workload, 2000);
    if (reference.exit != model::ExitKind::Normal) continue;
    if (simprog::enumerate_points(generated.program).empty()) continue;
    ++tested;

    model::AcceptabilityOracle oracle;
    oracle.domain = model::DomainCheck::TraceExact;
    oracle.expected_trace = reference.trace;

    TempDir dir("campaign_parallel_" + std::to_string(seed));
    auto sequential_config = sim_config(dir, generated.program_doc.dump(),
                                        generated.workload_doc.dump(), oracle, "out_seq");
    sequential_config.step_budget = 2000;
    auto parallel_config = sequential_config;
    parallel_config.out_dir = dir.path() / "out_par";
    parallel_config.parallel = 4;

    Campaign sequential(sequential_config);
    Campaign parallel(parallel_config);
    CHECK(normalized_report(sequential) == normalized_report(parallel));
  }
  CHECK(tested == 3);
}

TEST_CASE("conflicting journal records are an integrity error") {
  TempDir dir("campaign_conflict");
  const auto config =
      sim_config(dir, kChainProgram, kSingleWorkload, contains_oracle({"done"}));
  const std::string fingerprint = controller::config_fingerprint(config);

  std::filesystem::create_directories(config.out_dir);
  controller::ExperimentRecord record;
  record.id = 1;
  record.purpose = controller::Purpose::Classify;
  record.point = {ref("m0"), 0, "IOException"};
  record.fault_model = model::FaultModel::FirstHit;
  record.verdict = {model::VerdictReason::Ok};
  auto conflicting = record;
  conflicting.id = 2;
  conflicting.verdict = {model::VerdictReason::Crash};
  {
    std::ofstream out(config.out_dir / "journal.jsonl");
    out << R"({"journal_version":1,"config_fingerprint":")" << fingerprint << "\"}\n";
    out << controller::serialize_record(record) << '\n';
    out << controller::serialize_record(conflicting) << '\n';
  }
  CHECK_THROWS_AS(Campaign{config}, IntegrityError);
}

TEST_CASE("journals from another configuration are refused") {
  TempDir dir("campaign_fingerprint");
  {
    Campaign campaign(
        sim_config(dir, kChainProgram, kSingleWorkload, contains_oracle({"done"})));
    campaign.detect();
  }
  auto other = sim_config(dir, kChainProgram, kSingleWorkload, contains_oracle({"payload"}));
  CHECK_THROWS_AS(Campaign{other}, IntegrityError);
}

TEST_CASE("external backend: health check, restart, unrecoverable") {
  TempDir dir("external_health");
  auto target = testsupport::make_fake_service(dir.path());
  controller::ExternalBackend backend(target, dir.path() / "experiments");

  CHECK(backend.health_check_and_restart() == controller::HealthStatus::Healthy);

  {
    std::ofstream state(dir.path() / "state");
    state << "corrupt\n";
  }
  CHECK(backend.health_check_and_restart() == controller::HealthStatus::Restarted);
  CHECK(backend.health_check_and_restart() == controller::HealthStatus::Healthy);

  // restart loses its power: unrecoverable
  testsupport::write_script(dir.path() / "restart.sh", "exit 1\n");
  {
    std::ofstream state(dir.path() / "state");
    state << "corrupt\n";
  }
  CHECK(backend.health_check_and_restart() == controller::HealthStatus::Unrecoverable);
}

TEST_CASE("external campaign: corrupting binding is excluded and the point retired") {
  TempDir dir("external_campaign");
  CampaignConfig config;
  config.target = testsupport::make_fake_service(dir.path());
  config.oracle.domain = model::DomainCheck::ExternalCommand;
  config.oracle.command = "true";
  config.oracle.timeout_ms = 10'000;
  config.out_dir = dir.path() / "out";

  Campaign campaign(config);
  const model::PerturbationPoint point{ref("svc/read"), 0, "IOException"};

  const auto& classification = campaign.classify();
  CHECK(classification.fragile.contains(point));

  const auto& candidates = campaign.discover();
  REQUIRE(candidates.size() == 3);  // read, handle, main: crash exposes the whole stack

  const auto& validated = campaign.assess();
  CHECK(validated.empty());

  const auto& state = campaign.state();
  bool exclusion_noted = false;
  for (const auto& anomaly : state.anomalies) {
    if (anomaly.kind == "health-exclusion") exclusion_noted = true;
  }
  CHECK(exclusion_noted);

  // svc/main was never assessed; svc/handle ran only its first experiment
  const auto records = read_journal(config.out_dir / "journal.jsonl");
  int handle_runs = 0;
  for (const auto& record : records) {
    CHECK(record.fo_handler != std::optional<model::MethodRef>{ref("svc/main")});
    if (record.fo_handler == std::optional<model::MethodRef>{ref("svc/handle")}) {
      ++handle_runs;
      CHECK(record.post_health == controller::HealthStatus::Restarted);
    }
  }
  CHECK(handle_runs == 1);
  CHECK(std::filesystem::exists(dir.path() / "restarts.log"));
  CHECK(state.executions_total == 6);  // baseline + 2 classify + 2 read + 1 handle
}

TEST_CASE("external campaign aborts when the target cannot recover") {
  TempDir dir("external_unrecoverable");
  auto target = testsupport::make_fake_service(dir.path());
  testsupport::write_script(dir.path() / "restart.sh", "exit 1\n");
  CampaignConfig config;
  config.target = target;
  config.oracle.domain = model::DomainCheck::ExternalCommand;
  config.oracle.command = "true";
  config.oracle.timeout_ms = 10'000;
  config.out_dir = dir.path() / "out";

  Campaign campaign(config);
  CHECK_THROWS_AS(campaign.assess(), CampaignAbort);
  // the journal kept everything that ran before the abort
  CHECK(std::filesystem::exists(config.out_dir / "journal.jsonl"));
}

TEST_CASE("simulator and subprocess backends observe the same monitoring data") {
  TempDir dir("backend_equiv");
  const auto program_file = dir.write("program.json", kChainProgram);
  const auto workload_file = dir.write("workload.json", kSingleWorkload);

  controller::SimulatorBackend sim(simprog::load_program(program_file),
                                   simprog::load_workload(workload_file));
  protocol::ExternalTarget target;
  target.launch_command = std::string("\"") + SIM_TARGET_BIN + "\" --program \"" +
                          program_file.string() + "\" --workload \"" +
                          workload_file.string() + "\"";
  target.health_check_command = "true";
  target.restart_command = "true";
  target.working_dir = dir.path();
  controller::ExternalBackend external(target, dir.path() / "experiments");

  simprog::InjectionPlan inject;
  inject.active_point = {ref("m0"), 0, "IOException"};
  inject.fault_model = model::FaultModel::Always;
  std::uint64_t ordinal = 1;
  for (const auto& plan : {simprog::InjectionPlan{}, inject}) {
    const auto in_process = sim.run(plan, {}, 5000, 10'000, ordinal);
    const auto subprocess = external.run(plan, {}, 5000, 10'000, ordinal);
    ++ordinal;
    CHECK(in_process.exit == subprocess.exit);
    CHECK(in_process.reaches == subprocess.reaches);
    REQUIRE(in_process.events.size() == subprocess.events.size());
    for (std::size_t i = 0; i < in_process.events.size(); ++i) {
      CHECK(in_process.events[i] == subprocess.events[i]);
    }
  }
}

TEST_CASE("config validation") {
  TempDir dir("config_validation");
  auto config = sim_config(dir, kChainProgram, kSingleWorkload, contains_oracle({"done"}));
  CHECK_NOTHROW(controller::validate_config(config));

  auto missing = config;
  missing.target = protocol::SimulatorTarget{dir.path() / "nope.json",
                                             dir.path() / "workload.json"};
  CHECK_THROWS(controller::validate_config(missing));

  protocol::ExternalTarget external;
  external.launch_command = "./x.sh";
  external.health_check_command = "./h.sh";
  external.restart_command = "./r.sh";
  external.working_dir = dir.path();

  auto external_parallel = config;
  external_parallel.target = external;
  external_parallel.oracle.domain = model::DomainCheck::ExternalCommand;
  external_parallel.oracle.command = "true";
  external_parallel.parallel = 4;
  CHECK_THROWS_AS(controller::validate_config(external_parallel), UsageError);

  auto external_trace = config;
  external_trace.target = external;
  CHECK_THROWS_AS(controller::validate_config(external_trace), UsageError);
}

TEST_CASE("two-frame layouts: candidate sets follow the catch position") {
  // layout 1: the immediate caller holds the handler; the raiser is the
  // only frame below it
  {
    TempDir dir("layout_caller");
    const std::string program = R"({
      "format_version": 1,
      "entry": "main",
      "methods": {
        "main": {"throws": [], "body": [
          {"try": [{"call": "m"}], "catch": [{"types": ["E1"], "body": []}]},
          {"emit": "done"}
        ]},
        "m": {"throws": ["E1"], "body": [{"emit": "w"}]}
      }
    })";
    Campaign campaign(sim_config(dir, program, kSingleWorkload, contains_oracle({"done"})));
    const auto& candidates = campaign.discover();
    REQUIRE(candidates.size() == 1);
    CHECK(candidates[0].handler == ref("m"));
    const auto brute = testsupport::brute_force_campaign(
        simprog::parse_program(program), simprog::WorkloadSpec{{{ref("main"), 1}}}, {"done"},
        true, 5000);
    CHECK(brute.candidates == candidates);
  }

  // layout 2: the handler method is the throwing method itself, one
  // recursion level up
  {
    TempDir dir("layout_self");
    const std::string program = R"({
      "format_version": 1,
      "entry": "x",
      "methods": {
        "x": {"throws": ["E1"], "body": [
          {"try": [{"call": "x"}],
           "catch": [{"types": ["StackOverflowError"], "body": []},
                      {"types": ["E1"], "body": [{"emit": "r"}]}]},
          {"emit": "w"}
        ]}
      }
    })";
    const std::string workload = R"({
      "format_version": 1,
      "invocations": [{"method": "x", "repeat": 1}]
    })";
    Campaign campaign(sim_config(dir, program, workload, contains_oracle({})));
    const auto& candidates = campaign.discover();
    const model::PerturbationPoint point{ref("x"), 1, "E1"};
    // the deepest frame reaches location 1 first; its injected exception is
    // caught by the enclosing x frame, so x itself is the only candidate
    std::vector<model::MethodRef> handlers;
    for (const auto& binding : candidates) {
      if (binding.point == point) handlers.push_back(binding.handler);
    }
    CHECK(handlers == std::vector<model::MethodRef>{ref("x")});
    const auto brute = testsupport::brute_force_campaign(
        simprog::parse_program(program),
        simprog::WorkloadSpec{{{ref("x"), 1}}}, {}, true, 5000);
    auto brute_sorted = brute.candidates;
    auto campaign_sorted = candidates;
    std::sort(brute_sorted.begin(), brute_sorted.end());
    std::sort(campaign_sorted.begin(), campaign_sorted.end());
    CHECK(brute_sorted == campaign_sorted);
  }
}

TEST_CASE("a same-frame manual catch reported by an external target yields no candidates") {
  TempDir dir("external_distance_zero");
  testsupport::write_script(dir.path() / "target.sh", R"sh(cfg="$TRIPLEAGENT_CONFIG"
log="$TRIPLEAGENT_LOG"
point=$(grep '^POINT ' "$cfg" | head -n1)
{
  if [ -z "$point" ]; then
    echo "REACH svc/read 0 IOException 1"
    echo "EXIT NORMAL"
  else
    echo "INJECT svc/read 0 IOException svc/read;svc/main"
    echo "CATCH IOException svc/read svc/read 0 MANUAL"
    echo "REACH svc/read 0 IOException 1"
    echo "EXIT NORMAL"
  fi
} > "$log"
)sh");
  CampaignConfig config;
  protocol::ExternalTarget target;
  target.launch_command = "./target.sh";
  target.health_check_command = "true";
  target.restart_command = "true";
  target.working_dir = dir.path();
  config.target = target;
  config.oracle.domain = model::DomainCheck::ExternalCommand;
  config.oracle.command = "true";
  config.oracle.timeout_ms = 10'000;
  config.out_dir = dir.path() / "out";

  Campaign campaign(config);
  CHECK(campaign.discover().empty());
  const auto& state = campaign.state();
  const model::PerturbationPoint point{ref("svc/read"), 0, "IOException"};
  CHECK(state.default_handlers.at(point) == ref("svc/read"));
  CHECK(state.classification.immunized.contains(point));
}

TEST_CASE("filters scope detection to a method prefix") {
  TempDir dir("campaign_filter");
  auto config = sim_config(dir, kChainProgram, kSingleWorkload, contains_oracle({"done"}));
  config.filter = "zzz";
  Campaign campaign(config);
  CHECK(campaign.detect().points.empty());
  CHECK(campaign.state().executions_total == 1);  // baseline only
}

TEST_CASE("command-line overrides replace config fields") {
  TempDir dir("config_overrides");
  auto config = sim_config(dir, kChainProgram, kSingleWorkload, contains_oracle({"done"}));
  controller::ConfigOverrides overrides;
  overrides.timeout_ms = 1234;
  overrides.filter = "m0";
  overrides.out_dir = dir.path() / "elsewhere";
  overrides.parallel = 3;
  controller::apply_overrides(config, overrides);
  CHECK(config.oracle.timeout_ms == 1234);
  CHECK(config.filter == "m0");
  CHECK(config.out_dir == dir.path() / "elsewhere");
  CHECK(config.parallel == 3);
}
