#pragma once

#include <chrono>
#include <filesystem>
#include <string>

namespace mrinv {

struct CommandResult {
  int exit_code = -1;      // valid when exited normally
  bool timed_out = false;  // killed after the deadline
  int signal = 0;          // terminating signal, 0 if none

  bool ok() const noexcept { return !timed_out && signal == 0 && exit_code == 0; }
};

/// Runs `command` through /bin/sh -c in its own process group with the inherited
/// environment. stdout and stderr are appended to log_path. On timeout the whole group
/// gets SIGTERM, then SIGKILL one second later.
CommandResult run_shell_command(const std::string& command, std::chrono::milliseconds timeout,
                                const std::filesystem::path& log_path);

}  // namespace mrinv
