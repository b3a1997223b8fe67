#pragma once
// Running the built fitodx binary as a child process, for end-to-end tests of
// `serve` (signals, exit codes, restarts).

#include <sys/types.h>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fitodx::testing {

// Starts FITODX_BINARY with `args`; its stderr goes to `stderr_path`.
pid_t spawn(const std::vector<std::string>& args, const std::filesystem::path& stderr_path,
            const std::vector<std::pair<std::string, std::string>>& env = {});

// Exit status, or 128 + signal number when killed.
int wait_exit(pid_t pid);

// A loopback port that was free a moment ago.
int free_port();

// Polls /v1/healthz for up to five seconds.
bool wait_healthy(int port);

}  // namespace fitodx::testing
