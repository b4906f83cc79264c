#include "codesynth/sandbox.hpp"

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "codesynth/errors.hpp"
#include "codesynth/runner_py.hpp"
#include "codesynth/subprocess.hpp"

namespace fs = std::filesystem;

namespace codesynth {

namespace {

// extra time the parent grants the child to report an in-runner timeout
// before the process group is killed
constexpr int64_t kKillGraceMs = 400;

std::string make_temp_dir(const char* tag) {
  const char* base = std::getenv("TMPDIR");
  fs::path dir = base && *base ? base : "/tmp";
  std::string tmpl = (dir / (std::string("codesynth-") + tag + "-XXXXXX")).string();
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  if (!::mkdtemp(buf.data()))
    throw SandboxSpawnError("mkdtemp failed for " + tmpl);
  return std::string(buf.data());
}

}  // namespace

std::string to_string(StageStatus s) {
  switch (s) {
    case StageStatus::OK:
      return "OK";
    case StageStatus::RAISED:
      return "RAISED";
    case StageStatus::TIMEOUT:
      return "TIMEOUT";
  }
  return "RAISED";
}

StageStatus stage_status_from_string(const std::string& s) {
  if (s == "OK") return StageStatus::OK;
  if (s == "TIMEOUT") return StageStatus::TIMEOUT;
  return StageStatus::RAISED;
}

std::string extract_code_block(const std::string& response) {
  size_t fence = response.find("```");
  if (fence == std::string::npos) return response;
  // skip the rest of the fence line (language tag)
  size_t body = response.find('\n', fence);
  if (body == std::string::npos) return "";
  ++body;
  size_t close = response.find("```", body);
  if (close == std::string::npos) return response.substr(body);
  // drop the newline that precedes the closing fence
  size_t end = close;
  if (end > body && response[end - 1] == '\n') --end;
  return response.substr(body, end - body);
}

std::string SandboxRunner::default_interpreter() {
  const char* env = std::getenv("CODESYNTH_PYTHON");
  return env && *env ? env : "python3";
}

SandboxRunner::SandboxRunner(std::string interpreter)
    : interpreter_(std::move(interpreter)) {
  runner_dir_ = make_temp_dir("runner");
  runner_path_ = (fs::path(runner_dir_) / "runner.py").string();
  std::ofstream out(runner_path_, std::ios::binary);
  if (!out) throw SandboxSpawnError("cannot write " + runner_path_);
  out << kRunnerProgram;
  out.close();

  // precompile once; jobs then skip parsing the runner source
  const std::string pyc = (fs::path(runner_dir_) / "runner.pyc").string();
  SpawnOptions compile_opts;
  compile_opts.argv = {interpreter_, "-I", "-S", "-c",
                       "import py_compile,sys\n"
                       "py_compile.compile(sys.argv[1], sys.argv[2])",
                       runner_path_, pyc};
  compile_opts.deadline_ms = 20000;
  try {
    SpawnResult r = run_process(compile_opts);
    if (r.exit_code == 0 && fs::exists(pyc)) runner_path_ = pyc;
  } catch (const Error&) {
    // keep running from source
  }
}

SandboxRunner::~SandboxRunner() {
  std::error_code ec;
  fs::remove_all(runner_dir_, ec);
}

Json SandboxRunner::run_job(const Json& job, const ExecLimits& limits,
                            double* duration_ms) const {
  const std::string workdir = make_temp_dir("job");

  SpawnOptions opts;
  opts.argv = {interpreter_, "-I", "-S", runner_path_};
  opts.working_dir = workdir;
  opts.stdin_data = job.dump();
  opts.deadline_ms = limits.wall_clock_ms + kKillGraceMs;
  opts.max_stdout_bytes = limits.max_output_bytes;

  SpawnResult res;
  try {
    res = run_process(opts);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(workdir, ec);
    throw;
  }
  std::error_code ec;
  fs::remove_all(workdir, ec);
  if (duration_ms) *duration_ms = res.duration_ms;

  if (res.timed_out) {
    // the runner reports in-process timeouts itself; synthesize one only
    // when it was killed before it could print a result
    if (!res.out.empty()) {
      try {
        return Json::parse(res.out);
      } catch (const nlohmann::json::exception&) {
      }
    }
    Json j;
    j["status"] = "hard_timeout";
    return j;
  }
  if (res.exit_code == 127 || res.exit_code == 126)
    throw SandboxUnavailableError("cannot execute '" + interpreter_ + "'");
  if (res.stdout_truncated)
    throw SerializationError("job result exceeded max_output_bytes");
  if (res.exit_code != 0)
    throw SandboxSpawnError("runner exited with status " +
                            std::to_string(res.exit_code) +
                            (res.err.empty() ? "" : ": " + res.err));
  try {
    return Json::parse(res.out);
  } catch (const nlohmann::json::exception&) {
    throw SandboxSpawnError("malformed runner output: " + res.out.substr(0, 200));
  }
}

std::vector<ExecutionTrace> SandboxRunner::trace(
    const std::string& code, const std::vector<std::string>& stage_fns,
    const std::vector<Json>& inputs, const ExecLimits& limits) const {
  Json job;
  job["mode"] = "trace";
  job["wall_clock_ms"] = limits.wall_clock_ms;
  job["code"] = code;
  job["stages"] = stage_fns;
  job["inputs"] = inputs;

  Json result = run_job(job, limits, nullptr);
  const std::string status = result.value("status", "");

  if (status == "hard_timeout") {
    // the child could not even report; every input set counts as timed out
    std::vector<ExecutionTrace> traces;
    for (size_t i = 0; i < inputs.size(); ++i) {
      ExecutionTrace t;
      t.input_set_index = i;
      t.overall_status = StageStatus::TIMEOUT;
      t.final_output = nullptr;
      traces.push_back(std::move(t));
    }
    return traces;
  }
  if (status == "compile_error")
    throw CompileError(result.value("detail", ""));
  if (status == "serialization_failure")
    throw SerializationError(result.value("detail", ""));
  if (status != "ok" || !result.contains("traces"))
    throw SandboxSpawnError("unexpected runner result: " + result.dump());

  std::vector<ExecutionTrace> traces;
  size_t idx = 0;
  for (const auto& jt : result["traces"]) {
    ExecutionTrace t;
    t.input_set_index = idx++;
    t.overall_status = stage_status_from_string(jt.value("status", "RAISED"));
    t.final_output = jt.contains("final") ? jt["final"] : Json(nullptr);
    for (const auto& js : jt["stages"]) {
      StageRecord r;
      r.atom_id = js.value("fn", "");
      r.input = js.contains("in") ? js["in"] : Json(nullptr);
      r.output = js.contains("out") ? js["out"] : Json(nullptr);
      r.status = stage_status_from_string(js.value("status", "RAISED"));
      r.detail = js.value("detail", "");
      t.stage_records.push_back(std::move(r));
    }
    traces.push_back(std::move(t));
  }
  if (traces.size() != inputs.size())
    throw SandboxSpawnError("runner returned " + std::to_string(traces.size()) +
                            " traces for " + std::to_string(inputs.size()) +
                            " inputs");
  return traces;
}

std::vector<ExecutionTrace> SandboxRunner::execute_chain(
    const SyntheticCandidate& cand, const MockSet& inputs,
    const ExecLimits& limits) const {
  auto traces = trace(cand.response, cand.stage_fns, inputs.payloads(), limits);
  const std::string cid = cand.chain.atom_ids.empty()
                              ? ""
                              : std::to_string(cand.chain.seed);
  for (auto& t : traces) {
    t.candidate_id = cid;
    // stages report fn names; map them back to atom ids by position
    for (size_t s = 0; s < t.stage_records.size() &&
                       s < cand.chain.atom_ids.size();
         ++s)
      t.stage_records[s].atom_id = cand.chain.atom_ids[s];
  }
  return traces;
}

JudgeResult SandboxRunner::run_unit_tests(const std::string& code,
                                          const std::vector<std::string>& tests,
                                          const ExecLimits& limits) const {
  if (tests.empty()) throw ValidationError("tests must be non-empty");
  Json job;
  job["mode"] = "judge";
  job["wall_clock_ms"] = limits.wall_clock_ms;
  job["code"] = code;
  job["tests"] = tests;

  JudgeResult out;
  Json result = run_job(job, limits, &out.duration_ms);
  const std::string status = result.value("status", "");
  if (status == "hard_timeout") {
    out.reward = 0;
    out.tests_total = static_cast<int64_t>(tests.size());
    out.tests_passed = 0;
    out.failure_detail = "wall clock exceeded";
    return out;
  }
  if (status != "ok")
    throw SandboxSpawnError("unexpected runner result: " + result.dump());
  out.reward = result.value("reward", 0);
  out.tests_total = result.value("tests_total", int64_t{0});
  out.tests_passed = result.value("tests_passed", int64_t{0});
  out.failure_detail = result.value("failure_detail", "");
  return out;
}

ValidationReport validate_atom(const AtomicFunction& atom,
                               const SandboxRunner& sandbox,
                               const ExecLimits& limits, uint64_t seed) {
  ValidationReport rep;
  rep.atom_id = atom.id;
  rep.defines_fn = atom.code.find("def " + atom.fn_name) != std::string::npos;

  Rng rng(seed_stream(seed, "validate:" + atom.id, 0));
  MockValue input = mock_value(atom.input_type, rng);

  std::vector<ExecutionTrace> traces;
  try {
    traces = sandbox.trace(atom.code, {atom.fn_name}, {input.payload}, limits);
  } catch (const CompileError& e) {
    rep.compiles = false;
    rep.detail = e.what();
    return rep;
  } catch (const SerializationError& e) {
    rep.compiles = true;
    rep.runs_ok = false;
    rep.detail = e.what();
    return rep;
  }
  rep.compiles = true;
  const ExecutionTrace& t = traces.at(0);
  if (!t.ok() || t.stage_records.empty()) {
    rep.runs_ok = false;
    rep.detail = t.stage_records.empty() ? "no stage executed"
                                         : t.stage_records[0].detail;
    return rep;
  }
  rep.runs_ok = true;
  const Json& out = t.final_output;
  auto cls = classify_value(out);
  rep.observed_type = out.is_null() ? "None" : (cls ? to_string(*cls) : "other");
  rep.output_type_ok = matches_value_type(out, atom.output_type);
  if (!rep.output_type_ok)
    rep.detail = "declared output " + to_string(atom.output_type) +
                 " but observed " + rep.observed_type;
  return rep;
}

}  // namespace codesynth
