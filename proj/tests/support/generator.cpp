#include "generator.hpp"

namespace testsupport {

namespace {

using nlohmann::json;

constexpr const char* kExceptionNames[] = {"E1", "E2"};

struct Generator {
  std::mt19937_64& rng;
  std::vector<std::string> method_names;

  int pick(int low, int high) {  // inclusive
    return std::uniform_int_distribution<int>(low, high)(rng);
  }
  bool chance(int percent) { return pick(1, 100) <= percent; }

  std::string token() { return "t" + std::to_string(pick(0, 7)); }
  std::string exception() { return kExceptionNames[pick(0, 1)]; }
  const std::string& method() { return method_names[pick(0, (int)method_names.size() - 1)]; }

  json catch_types() {
    json types = json::array();
    switch (pick(0, 3)) {
      case 0:
        types.push_back("E1");
        break;
      case 1:
        types.push_back("E2");
        break;
      case 2:
        types.push_back("E1");
        types.push_back("E2");
        break;
      default:
        types.push_back("*");
    }
    return types;
  }

  json statement(int depth) {
    const int roll = pick(1, 100);
    if (depth < 2 && roll <= 12) {
      json try_body = json::array();
      const int n = pick(1, 2);
      for (int i = 0; i < n; ++i) try_body.push_back(statement(depth + 1));
      json clauses = json::array();
      const int clause_count = pick(1, 2);
      for (int c = 0; c < clause_count; ++c) {
        json body = json::array();
        const int handler_len = pick(0, 2);
        for (int i = 0; i < handler_len; ++i) body.push_back(statement(depth + 1));
        clauses.push_back({{"types", catch_types()}, {"body", std::move(body)}});
      }
      return {{"try", std::move(try_body)}, {"catch", std::move(clauses)}};
    }
    if (roll <= 27) {
      // the common real-world shape: a call site wrapped in its own handler
      json handler = json::array();
      if (chance(50)) handler.push_back({{"emit", token()}});
      json clauses = json::array();
      clauses.push_back({{"types", catch_types()}, {"body", std::move(handler)}});
      json try_body = json::array();
      try_body.push_back({{"call", method()}});
      return {{"try", std::move(try_body)}, {"catch", std::move(clauses)}};
    }
    if (depth < 2 && roll <= 37) {
      json body = json::array();
      const int n = pick(1, 2);
      for (int i = 0; i < n; ++i) body.push_back(statement(depth + 1));
      return {{"loop", pick(1, 3)}, {"body", std::move(body)}};
    }
    if (roll <= 57) return {{"call", method()}};
    if (roll <= 62) {
      // organic throws mostly live inside try blocks already; a bare one
      // at low probability keeps crashing baselines in the corpus
      return {{"throw", exception()}};
    }
    if (roll <= 64) return {{"hang", true}};
    return {{"emit", token()}};
  }
};

}  // namespace

GeneratedCase random_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Generator gen{rng, {}};

  const int method_count = gen.pick(2, 6);
  for (int i = 0; i < method_count; ++i) {
    gen.method_names.push_back("m" + std::to_string(i));
  }

  json methods;
  for (const auto& name : gen.method_names) {
    json throws = json::array();
    const int declared = gen.pick(0, 2);
    if (declared >= 1) throws.push_back("E1");
    if (declared == 2) throws.push_back("E2");
    json body = json::array();
    const int statements = gen.pick(1, 4);
    for (int i = 0; i < statements; ++i) body.push_back(gen.statement(0));
    methods[name] = {{"throws", std::move(throws)}, {"body", std::move(body)}};
  }

  GeneratedCase out;
  out.program_doc = {{"format_version", 1}, {"entry", "m0"}, {"methods", std::move(methods)}};

  json invocations = json::array();
  const int invocation_count = gen.pick(1, 3);
  for (int i = 0; i < invocation_count; ++i) {
    const std::string target = i == 0 ? "m0" : gen.method();
    invocations.push_back({{"method", target}, {"repeat", gen.pick(1, 3)}});
  }
  out.workload_doc = {{"format_version", 1}, {"invocations", std::move(invocations)}};

  out.program = tripleagent::simprog::parse_program(out.program_doc.dump());
  out.workload = tripleagent::simprog::parse_workload(out.workload_doc.dump());
  return out;
}

tripleagent::protocol::ActivationFile random_activation(std::mt19937_64& rng) {
  using namespace tripleagent;
  Generator gen{rng, {}};
  for (int i = 0; i < 8; ++i) gen.method_names.push_back("pkg/Class" + std::to_string(i) + "/run");

  protocol::ActivationFile activation;
  if (gen.chance(70)) {
    model::PerturbationPoint point;
    point.method.identifier = gen.method();
    point.location = static_cast<std::uint32_t>(gen.pick(0, 40));
    point.exception_type = gen.exception();
    activation.plan.active_point = std::move(point);
    activation.plan.fault_model =
        gen.chance(50) ? model::FaultModel::FirstHit : model::FaultModel::Always;
  }
  const int handlers = gen.pick(0, 4);
  for (int i = 0; i < handlers; ++i) {
    activation.fo.active_handlers.insert(model::MethodRef{gen.method()});
  }
  activation.step_budget = static_cast<std::uint64_t>(gen.pick(1, 1'000'000));
  activation.timeout_ms = static_cast<std::uint32_t>(gen.pick(1, 600'000));
  return activation;
}

tripleagent::protocol::MonitorLog random_monitor_log(std::mt19937_64& rng) {
  using namespace tripleagent;
  Generator gen{rng, {}};
  for (int i = 0; i < 8; ++i) gen.method_names.push_back("pkg/Class" + std::to_string(i) + "/run");

  protocol::MonitorLog log;
  const int events = gen.pick(0, 12);
  for (int i = 0; i < events; ++i) {
    switch (gen.pick(0, 2)) {
      case 0: {
        protocol::ReachRecord record;
        record.point.method.identifier = gen.method();
        record.point.location = static_cast<std::uint32_t>(gen.pick(0, 40));
        record.point.exception_type = gen.exception();
        record.count = static_cast<std::uint64_t>(gen.pick(0, 100'000));
        log.records.emplace_back(std::move(record));
        break;
      }
      case 1: {
        protocol::InjectRecord record;
        record.point.method.identifier = gen.method();
        record.point.location = static_cast<std::uint32_t>(gen.pick(0, 40));
        record.point.exception_type = gen.exception();
        record.stack.push_back(record.point.method);
        const int extra = gen.pick(0, 5);
        for (int f = 0; f < extra; ++f) {
          record.stack.push_back(model::MethodRef{gen.method()});
        }
        log.records.emplace_back(std::move(record));
        break;
      }
      default: {
        protocol::CatchRecord record;
        record.exception_type = gen.exception();
        record.raiser.identifier = gen.method();
        record.catcher.identifier = gen.method();
        record.distance = static_cast<std::uint32_t>(gen.pick(0, 38));
        record.kind =
            gen.chance(50) ? model::HandlerKind::Manual : model::HandlerKind::FoWrapper;
        log.records.emplace_back(std::move(record));
        break;
      }
    }
  }
  log.complete = true;
  log.exit = gen.chance(75) ? model::ExitKind::Normal : model::ExitKind::Crash;
  return log;
}

}  // namespace testsupport
