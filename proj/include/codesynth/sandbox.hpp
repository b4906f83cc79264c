#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "codesynth/atoms.hpp"
#include "codesynth/compose.hpp"
#include "codesynth/mock.hpp"
#include "codesynth/value.hpp"

namespace codesynth {

struct ExecLimits {
  int64_t wall_clock_ms = 5000;
  size_t max_output_bytes = 65536;
  int max_processes = 1;
  // Filesystem writes are confined to the job's ephemeral working directory
  // and network access is denied; both are enforced by the runner.
};

enum class StageStatus { OK, RAISED, TIMEOUT };

std::string to_string(StageStatus s);
StageStatus stage_status_from_string(const std::string& s);

struct StageRecord {
  std::string atom_id;   // fn name of the stage
  Json input;
  Json output;           // null when the stage did not produce a value
  StageStatus status = StageStatus::OK;
  std::string detail;    // exception summary for RAISED stages
};

struct ExecutionTrace {
  std::string candidate_id;
  size_t input_set_index = 0;
  std::vector<StageRecord> stage_records;  // stops at the first non-OK stage
  Json final_output;                       // null unless all stages OK
  StageStatus overall_status = StageStatus::OK;

  bool ok() const { return overall_status == StageStatus::OK; }
};

struct JudgeResult {
  int reward = 0;  // 1 iff every test passed
  int64_t tests_total = 0;
  int64_t tests_passed = 0;
  std::string failure_detail;
  double duration_ms = 0.0;
};

// Returns the contents of the first fenced code block if any fence exists,
// otherwise the whole response. Fence language tags are ignored.
std::string extract_code_block(const std::string& response);

// Runs jobs in one child interpreter process each. The runner program is
// written to a private directory at construction; every job gets a fresh
// ephemeral working directory that is removed afterwards.
class SandboxRunner {
 public:
  explicit SandboxRunner(std::string interpreter = default_interpreter());
  ~SandboxRunner();

  SandboxRunner(const SandboxRunner&) = delete;
  SandboxRunner& operator=(const SandboxRunner&) = delete;

  // Executes the stage functions in order on each input; one trace per
  // input. Throws CompileError when the code does not compile and
  // SerializationError when a stage produces a non-encodable value.
  std::vector<ExecutionTrace> trace(const std::string& code,
                                    const std::vector<std::string>& stage_fns,
                                    const std::vector<Json>& inputs,
                                    const ExecLimits& limits) const;

  std::vector<ExecutionTrace> execute_chain(const SyntheticCandidate& cand,
                                            const MockSet& inputs,
                                            const ExecLimits& limits) const;

  // Runs the code followed by the assertions in a fresh process. reward is
  // 1 iff every assertion passes. tests must be non-empty.
  JudgeResult run_unit_tests(const std::string& code,
                             const std::vector<std::string>& tests,
                             const ExecLimits& limits) const;

  const std::string& interpreter() const { return interpreter_; }

  // Resolved from the CODESYNTH_PYTHON environment variable, falling back
  // to python3.
  static std::string default_interpreter();

 private:
  Json run_job(const Json& job, const ExecLimits& limits, double* duration_ms) const;

  std::string interpreter_;
  std::string runner_dir_;   // holds the runner program for this instance
  std::string runner_path_;
};

struct ValidationReport {
  std::string atom_id;
  bool defines_fn = false;
  bool compiles = false;
  bool runs_ok = false;         // the single mocked call returned a value
  bool output_type_ok = false;  // observed type matches the declared one
  std::string observed_type;    // textual tag of what actually came back
  std::string detail;

  bool fully_passing() const {
    return defines_fn && compiles && runs_ok && output_type_ok;
  }
};

// Pre-flight check for one atom: compile, call fn_name on one mocked input
// of the declared input type, compare the observed output type.
ValidationReport validate_atom(const AtomicFunction& atom,
                               const SandboxRunner& sandbox,
                               const ExecLimits& limits = {},
                               uint64_t seed = 0);

}  // namespace codesynth
