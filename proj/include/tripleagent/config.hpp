#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "tripleagent/model.hpp"
#include "tripleagent/protocol.hpp"

namespace tripleagent::controller {

/// A campaign configuration, usually loaded from a JSON file. Relative
/// paths are resolved against the config file's directory.
struct CampaignConfig {
  protocol::TargetDescriptor target;
  model::AcceptabilityOracle oracle;
  std::string filter;
  std::uint64_t step_budget = 100'000;
  std::filesystem::path out_dir = "out";
  unsigned parallel = 1;
};

/// Command-line overrides applied on top of the file.
struct ConfigOverrides {
  std::optional<std::uint32_t> timeout_ms;
  std::optional<std::string> filter;
  std::optional<std::filesystem::path> out_dir;
  std::optional<unsigned> parallel;
};

CampaignConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
CampaignConfig load_config(const std::filesystem::path& file);

void apply_overrides(CampaignConfig& config, const ConfigOverrides& overrides);

/// Semantic checks beyond parsing: referenced files parse, oracle payloads
/// fit the target kind, parallelism is simulator-only. Throws UsageError or
/// ParseError describing the first problem.
void validate_config(const CampaignConfig& config);

/// Stable fingerprint of the effective configuration, used to guard journal
/// and artifact reuse across runs.
std::string config_fingerprint(const CampaignConfig& config);

}  // namespace tripleagent::controller
