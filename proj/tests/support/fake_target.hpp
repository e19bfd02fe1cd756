#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <sys/stat.h>

#include "tripleagent/protocol.hpp"

namespace testsupport {

inline void write_script(const std::filesystem::path& file, const std::string& body) {
  {
    std::ofstream out(file);
    out << "#!/bin/sh\n" << body;
  }
  ::chmod(file.c_str(), 0755);
}

/// Scripted stand-in for an out-of-process service: one perturbation point
/// svc/read with the call stack svc/read;svc/handle;svc/main and no manual
/// handler. Uninjected runs pass; injections crash. Activating the wrapper
/// on svc/handle reports success but corrupts the state file, which only
/// the health check can see.
inline tripleagent::protocol::ExternalTarget make_fake_service(
    const std::filesystem::path& dir) {
  write_script(dir / "target.sh", R"sh(cfg="$TRIPLEAGENT_CONFIG"
log="$TRIPLEAGENT_LOG"
point=$(grep '^POINT ' "$cfg" | head -n1)
fo=$(grep '^FO ' "$cfg" | head -n1 | cut -d' ' -f2)
{
  if [ -z "$point" ]; then
    echo "REACH svc/read 0 IOException 2"
    echo "EXIT NORMAL"
  elif [ -z "$fo" ]; then
    echo "INJECT svc/read 0 IOException svc/read;svc/handle;svc/main"
    echo "REACH svc/read 0 IOException 1"
    echo "EXIT CRASH"
  elif [ "$fo" = "svc/handle" ]; then
    echo corrupt > state
    echo "INJECT svc/read 0 IOException svc/read;svc/handle;svc/main"
    echo "CATCH IOException svc/read svc/handle 1 FO_WRAPPER"
    echo "REACH svc/read 0 IOException 1"
    echo "EXIT NORMAL"
  else
    case "$fo" in
      svc/read) d=0;;
      *) d=2;;
    esac
    echo "INJECT svc/read 0 IOException svc/read;svc/handle;svc/main"
    echo "CATCH IOException svc/read $fo $d FO_WRAPPER"
    echo "REACH svc/read 0 IOException 1"
    echo "EXIT CRASH"
  fi
} > "$log"
)sh");
  write_script(dir / "health.sh", R"sh([ "$(cat state 2>/dev/null)" = "ok" ]
)sh");
  write_script(dir / "restart.sh", R"sh(echo ok > state
echo restarted >> restarts.log
)sh");
  {
    std::ofstream state(dir / "state");
    state << "ok\n";
  }
  tripleagent::protocol::ExternalTarget target;
  target.launch_command = "./target.sh";
  target.health_check_command = "./health.sh";
  target.restart_command = "./restart.sh";
  target.working_dir = dir;
  return target;
}

}  // namespace testsupport
