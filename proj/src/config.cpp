#include "tripleagent/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tripleagent/simprog.hpp"

namespace tripleagent::controller {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& locus, const std::string& what) {
  throw ParseError("config: " + locus + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& locus) {
  if (!obj.is_object() || !obj.contains(key)) {
    fail(locus, std::string("missing required field '") + key + "'");
  }
  return obj.at(key);
}

std::string require_string(const json& value, const std::string& locus) {
  if (!value.is_string() || value.get<std::string>().empty()) {
    fail(locus, "expected a non-empty string");
  }
  return value.get<std::string>();
}

std::filesystem::path resolve(const std::string& path, const std::filesystem::path& base_dir) {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void check_known_keys(const json& obj, std::initializer_list<const char*> known,
                      const std::string& locus) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool found = false;
    for (const char* k : known) {
      if (key == k) {
        found = true;
        break;
      }
    }
    if (!found) fail(locus, "unknown field '" + key + "'");
  }
}

model::AcceptabilityOracle parse_oracle(const json& doc, const std::string& locus) {
  check_known_keys(doc, {"require_normal_exit", "timeout_ms", "domain"}, locus);
  model::AcceptabilityOracle oracle;
  if (doc.contains("require_normal_exit")) {
    if (!doc.at("require_normal_exit").is_boolean()) {
      fail(locus, "require_normal_exit must be a boolean");
    }
    oracle.require_normal_exit = doc.at("require_normal_exit").get<bool>();
  }
  if (doc.contains("timeout_ms")) {
    if (!doc.at("timeout_ms").is_number_unsigned() ||
        doc.at("timeout_ms").get<std::uint64_t>() == 0) {
      fail(locus, "timeout_ms must be a positive integer");
    }
    oracle.timeout_ms = doc.at("timeout_ms").get<std::uint32_t>();
  }
  const json& domain = require(doc, "domain", locus);
  const std::string kind = require_string(require(domain, "kind", locus + ".domain"),
                                          locus + ".domain.kind");
  if (kind == "trace_exact" || kind == "trace_contains") {
    oracle.domain = kind == "trace_exact" ? model::DomainCheck::TraceExact
                                          : model::DomainCheck::TraceContains;
    check_known_keys(domain, {"kind", "expected"}, locus + ".domain");
    const json& expected = require(domain, "expected", locus + ".domain");
    if (!expected.is_array()) fail(locus + ".domain.expected", "expected an array of tokens");
    for (const json& token : expected) {
      if (!token.is_string()) fail(locus + ".domain.expected", "tokens must be strings");
      oracle.expected_trace.push_back(token.get<std::string>());
    }
  } else if (kind == "external_command") {
    oracle.domain = model::DomainCheck::ExternalCommand;
    check_known_keys(domain, {"kind", "command"}, locus + ".domain");
    oracle.command = require_string(require(domain, "command", locus + ".domain"),
                                    locus + ".domain.command");
  } else {
    fail(locus + ".domain.kind",
         "expected trace_exact, trace_contains or external_command");
  }
  return oracle;
}

protocol::TargetDescriptor parse_target(const json& doc, const std::string& locus,
                                        const std::filesystem::path& base_dir) {
  const std::string backend = require_string(require(doc, "backend", locus), locus + ".backend");
  if (backend == "simulator") {
    check_known_keys(doc, {"backend", "program", "workload"}, locus);
    protocol::SimulatorTarget target;
    target.program_file =
        resolve(require_string(require(doc, "program", locus), locus + ".program"), base_dir);
    target.workload_file =
        resolve(require_string(require(doc, "workload", locus), locus + ".workload"), base_dir);
    return target;
  }
  if (backend == "external") {
    check_known_keys(doc, {"backend", "launch", "health_check", "restart", "workdir"}, locus);
    protocol::ExternalTarget target;
    target.launch_command = require_string(require(doc, "launch", locus), locus + ".launch");
    target.health_check_command =
        require_string(require(doc, "health_check", locus), locus + ".health_check");
    target.restart_command = require_string(require(doc, "restart", locus), locus + ".restart");
    target.working_dir =
        resolve(require_string(require(doc, "workdir", locus), locus + ".workdir"), base_dir);
    return target;
  }
  fail(locus + ".backend", "expected 'simulator' or 'external'");
}

}  // namespace

CampaignConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("config: expected a JSON object");
  check_known_keys(
      doc, {"format_version", "target", "oracle", "filter", "step_budget", "out", "parallel"},
      "config");
  const json& version = require(doc, "format_version", "config");
  if (!version.is_number_integer() || version.get<int>() != 1) {
    fail("format_version", "unsupported format_version (expected 1)");
  }
  CampaignConfig config;
  config.target = parse_target(require(doc, "target", "config"), "target", base_dir);
  config.oracle = parse_oracle(require(doc, "oracle", "config"), "oracle");
  if (doc.contains("filter")) {
    if (!doc.at("filter").is_string()) fail("filter", "expected a string");
    config.filter = doc.at("filter").get<std::string>();
  }
  if (doc.contains("step_budget")) {
    if (!doc.at("step_budget").is_number_unsigned() ||
        doc.at("step_budget").get<std::uint64_t>() == 0) {
      fail("step_budget", "expected a positive integer");
    }
    config.step_budget = doc.at("step_budget").get<std::uint64_t>();
  }
  if (doc.contains("out")) {
    config.out_dir = resolve(require_string(doc.at("out"), "out"), base_dir);
  } else {
    config.out_dir = resolve("out", base_dir);
  }
  if (doc.contains("parallel")) {
    if (!doc.at("parallel").is_number_unsigned() ||
        doc.at("parallel").get<std::uint64_t>() == 0 ||
        doc.at("parallel").get<std::uint64_t>() > 256) {
      fail("parallel", "expected an integer in [1, 256]");
    }
    config.parallel = doc.at("parallel").get<unsigned>();
  }
  return config;
}

CampaignConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open config " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), file.parent_path());
}

void apply_overrides(CampaignConfig& config, const ConfigOverrides& overrides) {
  if (overrides.timeout_ms) config.oracle.timeout_ms = *overrides.timeout_ms;
  if (overrides.filter) config.filter = *overrides.filter;
  if (overrides.out_dir) config.out_dir = *overrides.out_dir;
  if (overrides.parallel) config.parallel = *overrides.parallel;
}

void validate_config(const CampaignConfig& config) {
  if (config.oracle.timeout_ms == 0) throw UsageError("timeout_ms must be positive");
  if (config.step_budget == 0) throw UsageError("step_budget must be positive");
  if (const auto* sim = std::get_if<protocol::SimulatorTarget>(&config.target)) {
    const auto program = simprog::load_program(sim->program_file);
    const auto workload = simprog::load_workload(sim->workload_file);
    simprog::validate_workload(program, workload);
  } else {
    const auto& external = std::get<protocol::ExternalTarget>(config.target);
    if (external.launch_command.empty() || external.health_check_command.empty() ||
        external.restart_command.empty()) {
      throw UsageError("external target commands must be non-empty");
    }
    if (config.parallel > 1) {
      throw UsageError("parallel execution is only available for the simulator backend");
    }
    if (config.oracle.domain == model::DomainCheck::TraceExact ||
        config.oracle.domain == model::DomainCheck::TraceContains) {
      throw UsageError(
          "trace oracles need the simulator backend; use an external_command oracle");
    }
  }
}

std::string config_fingerprint(const CampaignConfig& config) {
  json doc;
  if (const auto* sim = std::get_if<protocol::SimulatorTarget>(&config.target)) {
    doc["target"] = {{"backend", "simulator"},
                     {"program", sim->program_file.string()},
                     {"workload", sim->workload_file.string()}};
  } else {
    const auto& external = std::get<protocol::ExternalTarget>(config.target);
    doc["target"] = {{"backend", "external"},
                     {"launch", external.launch_command},
                     {"health_check", external.health_check_command},
                     {"restart", external.restart_command},
                     {"workdir", external.working_dir.string()}};
  }
  doc["oracle"] = {{"require_normal_exit", config.oracle.require_normal_exit},
                   {"timeout_ms", config.oracle.timeout_ms},
                   {"domain", static_cast<int>(config.oracle.domain)},
                   {"expected", config.oracle.expected_trace},
                   {"command", config.oracle.command}};
  doc["filter"] = config.filter;
  doc["step_budget"] = config.step_budget;
  const std::string canonical = doc.dump();
  // FNV-1a 64
  std::uint64_t hash = 1469598103934665603ULL;
  for (const unsigned char c : canonical) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

}  // namespace tripleagent::controller
