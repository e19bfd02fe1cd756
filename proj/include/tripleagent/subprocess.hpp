#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace tripleagent::subprocess {

struct CommandResult {
  int exit_code = -1;
  bool timed_out = false;
  bool launch_failed = false;

  /// 126/127 from the shell mean the command itself could not be run.
  bool not_executable() const {
    return launch_failed || exit_code == 126 || exit_code == 127;
  }
};

/// Runs `command` through /bin/sh -c in `working_dir` with the given extra
/// environment variables. The whole process group is killed when the
/// timeout elapses. stdout/stderr go to the given files, or /dev/null when
/// empty.
CommandResult run_command(const std::string& command, const std::filesystem::path& working_dir,
                          const std::vector<std::pair<std::string, std::string>>& extra_env,
                          std::uint32_t timeout_ms,
                          const std::filesystem::path& stdout_file = {},
                          const std::filesystem::path& stderr_file = {});

}  // namespace tripleagent::subprocess
