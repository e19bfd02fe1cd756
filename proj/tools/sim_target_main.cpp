#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "tripleagent/errors.hpp"
#include "tripleagent/protocol.hpp"
#include "tripleagent/simprog.hpp"

// Runs one simulator program as if it were an external target: reads the
// activation file named by TRIPLEAGENT_CONFIG, executes the workload, and
// writes the monitor log to TRIPLEAGENT_LOG. A simulated hang leaves the
// log without its EXIT record and blocks until killed, the way a frozen
// process would.

int main(int argc, char** argv) {
  using namespace tripleagent;

  CLI::App app{"Simulator program driven through the agent file protocol"};
  std::string program_path;
  std::string workload_path;
  app.add_option("--program", program_path, "Program model file")->required();
  app.add_option("--workload", workload_path, "Workload file")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const char* config_path = std::getenv(protocol::kConfigEnvVar);
  const char* log_path = std::getenv(protocol::kLogEnvVar);
  if (config_path == nullptr || log_path == nullptr) {
    std::cerr << "TRIPLEAGENT_CONFIG and TRIPLEAGENT_LOG must be set\n";
    return 2;
  }

  try {
    const protocol::ActivationFile activation = protocol::load_activation(config_path);
    const simprog::ProgramModel program = simprog::load_program(program_path);
    const simprog::WorkloadSpec workload = simprog::load_workload(workload_path);

    const simprog::ExecutionResult execution = simprog::execute(
        program, workload, activation.plan, activation.fo, activation.step_budget);

    const auto points = simprog::enumerate_points(program);
    const protocol::MonitorLog log = protocol::log_from_execution(execution, points);
    {
      std::ofstream out(log_path, std::ios::binary);
      if (!out) throw IoError(std::string("cannot write ") + log_path);
      out << protocol::serialize_monitor_log(log);
      out.flush();
    }
    for (const auto& token : execution.emitted_trace) {
      std::cout << token << '\n';
    }
    std::cout.flush();

    switch (execution.exit) {
      case model::ExitKind::Normal:
        return 0;
      case model::ExitKind::Crash:
        return 3;
      case model::ExitKind::Hang:
        for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
