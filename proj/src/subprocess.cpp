#include "tripleagent/subprocess.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "tripleagent/errors.hpp"

namespace tripleagent::subprocess {

namespace {

void redirect(int target_fd, const std::filesystem::path& file) {
  const int fd = file.empty()
                     ? ::open("/dev/null", O_WRONLY)
                     : ::open(file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd >= 0) {
    ::dup2(fd, target_fd);
    ::close(fd);
  }
}

}  // namespace

CommandResult run_command(const std::string& command, const std::filesystem::path& working_dir,
                          const std::vector<std::pair<std::string, std::string>>& extra_env,
                          std::uint32_t timeout_ms, const std::filesystem::path& stdout_file,
                          const std::filesystem::path& stderr_file) {
  CommandResult result;
  const pid_t pid = ::fork();
  if (pid < 0) {
    result.launch_failed = true;
    return result;
  }
  if (pid == 0) {
    ::setpgid(0, 0);  // own process group, killable as a whole
    if (!working_dir.empty() && ::chdir(working_dir.c_str()) != 0) _exit(127);
    for (const auto& [key, value] : extra_env) {
      ::setenv(key.c_str(), value.c_str(), 1);
    }
    redirect(STDOUT_FILENO, stdout_file);
    redirect(STDERR_FILENO, stderr_file);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }

  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  int status = 0;
  for (;;) {
    const pid_t waited = ::waitpid(pid, &status, WNOHANG);
    if (waited == pid) break;
    if (waited < 0 && errno != EINTR) {
      result.launch_failed = true;
      return result;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      result.timed_out = true;
      result.exit_code = -1;
      return result;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else {
    result.exit_code = -1;  // killed by a signal
  }
  return result;
}

}  // namespace tripleagent::subprocess
