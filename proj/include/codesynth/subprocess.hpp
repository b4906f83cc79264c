#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace codesynth {

struct SpawnOptions {
  std::vector<std::string> argv;  // argv[0] is the executable
  std::string working_dir;
  std::string stdin_data;
  int64_t deadline_ms = 5000;     // hard wall-clock kill for the child
  size_t max_stdout_bytes = 1 << 20;
  size_t max_stderr_bytes = 1 << 14;
};

struct SpawnResult {
  int exit_code = -1;       // valid when !timed_out && signal == 0
  int signal = 0;           // terminating signal, 0 if exited normally
  bool timed_out = false;   // killed at the deadline
  bool stdout_truncated = false;
  std::string out;
  std::string err;
  double duration_ms = 0.0;
};

// Runs one child process in its own process group, feeds stdin_data, reads
// stdout/stderr up to the caps and kills the whole group at the deadline.
// Throws SandboxSpawnError when the child cannot be started.
SpawnResult run_process(const SpawnOptions& opts);

}  // namespace codesynth
