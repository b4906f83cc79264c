#include <doctest.h>

#include <chrono>
#include <filesystem>

#include "codesynth/atoms.hpp"
#include "codesynth/errors.hpp"
#include "codesynth/sandbox.hpp"

using namespace codesynth;
namespace fs = std::filesystem;

namespace {

const SandboxRunner& shared_runner() {
  static SandboxRunner runner;
  return runner;
}

ExecLimits quick_limits(int64_t wall_ms = 5000) {
  ExecLimits l;
  l.wall_clock_ms = wall_ms;
  return l;
}

}  // namespace

TEST_CASE("extract_code_block") {
  CHECK(extract_code_block("```\nx = 1\n```\n") == "x = 1");
  CHECK(extract_code_block("text\n```python\nx = 1\ny = 2\n```\ntail") ==
        "x = 1\ny = 2");
  CHECK(extract_code_block("```py\nfirst\n```\n```\nsecond\n```") == "first");
  CHECK(extract_code_block("plain code, no fence") == "plain code, no fence");
  CHECK(extract_code_block("```\nunterminated\nblock") == "unterminated\nblock");
}

TEST_CASE("trace records per-stage inputs and outputs") {
  const std::string code =
      "def inc(x):\n    return x + 1\n\ndef dbl(x):\n    return 2 * x\n";
  auto traces =
      shared_runner().trace(code, {"inc", "dbl"}, {Json(3), Json(10)},
                            quick_limits());
  REQUIRE(traces.size() == 2);
  const auto& t = traces[0];
  CHECK(t.ok());
  REQUIRE(t.stage_records.size() == 2);
  CHECK(t.stage_records[0].input == Json(3));
  CHECK(t.stage_records[0].output == Json(4));
  CHECK(t.stage_records[1].input == Json(4));
  CHECK(t.stage_records[1].output == Json(8));
  CHECK(t.final_output == Json(8));
  CHECK(traces[1].final_output == Json(22));
}

TEST_CASE("a raising stage stops the trace") {
  const std::string code =
      "def ok(x):\n    return x\n\ndef boom(x):\n    return 1 // (x - x)\n\n"
      "def after(x):\n    return x\n";
  auto traces = shared_runner().trace(code, {"ok", "boom", "after"}, {Json(5)},
                                      quick_limits());
  REQUIRE(traces.size() == 1);
  CHECK(traces[0].overall_status == StageStatus::RAISED);
  REQUIRE(traces[0].stage_records.size() == 2);  // later stages absent
  CHECK(traces[0].stage_records[1].status == StageStatus::RAISED);
  CHECK(traces[0].stage_records[1].detail.find("ZeroDivisionError") !=
        std::string::npos);
  CHECK(traces[0].final_output.is_null());
}

TEST_CASE("an infinite loop times out within the grace window") {
  const std::string code = "def spin(x):\n    while True:\n        pass\n";
  const int64_t wall = 300;
  auto t0 = std::chrono::steady_clock::now();
  auto traces = shared_runner().trace(code, {"spin"}, {Json(1)},
                                      quick_limits(wall));
  auto ms = std::chrono::duration<double, std::milli>(
                std::chrono::steady_clock::now() - t0)
                .count();
  REQUIRE(traces.size() == 1);
  CHECK(traces[0].overall_status == StageStatus::TIMEOUT);
  CHECK(ms <= static_cast<double>(wall + 500));
}

TEST_CASE("null stage outputs are recorded as null") {
  const std::string code = "def nothing(x):\n    return None\n";
  auto traces =
      shared_runner().trace(code, {"nothing"}, {Json(1)}, quick_limits());
  CHECK(traces[0].ok());
  CHECK(traces[0].stage_records[0].output.is_null());
  CHECK(traces[0].final_output.is_null());
}

TEST_CASE("syntax errors surface as CompileError") {
  CHECK_THROWS_AS(
      shared_runner().trace("def broken(:\n", {"broken"}, {Json(1)},
                            quick_limits()),
      CompileError);
}

TEST_CASE("unencodable stage values surface as SerializationError") {
  const std::string code = "def f(x):\n    return {\"a\": 1}\n";
  CHECK_THROWS_AS(
      shared_runner().trace(code, {"f"}, {Json(1)}, quick_limits()),
      SerializationError);
  const std::string big = "def f(x):\n    return 10 ** 30\n";
  CHECK_THROWS_AS(
      shared_runner().trace(big, {"f"}, {Json(1)}, quick_limits()),
      SerializationError);
  const std::string boolean = "def f(x):\n    return True\n";
  CHECK_THROWS_AS(
      shared_runner().trace(boolean, {"f"}, {Json(1)}, quick_limits()),
      SerializationError);
}

TEST_CASE("judge rewards 1 only when every assertion passes") {
  const std::string code = "def solve(x):\n    return x * 2\n";
  JudgeResult pass = shared_runner().run_unit_tests(
      code, {"assert solve(1) == 2", "assert solve(3) == 6"}, quick_limits());
  CHECK(pass.reward == 1);
  CHECK(pass.tests_total == 2);
  CHECK(pass.tests_passed == 2);
  CHECK(pass.failure_detail.empty());

  JudgeResult fail = shared_runner().run_unit_tests(
      code, {"assert solve(1) == 2", "assert solve(3) == 7"}, quick_limits());
  CHECK(fail.reward == 0);
  CHECK(fail.tests_passed == 1);
  CHECK(fail.failure_detail.find("solve(3) == 7") != std::string::npos);
}

TEST_CASE("empty-body style answers score 0 with the first failure named") {
  JudgeResult r = shared_runner().run_unit_tests(
      "def solve(x):\n    return None\n",
      {"assert solve(1) == 2", "assert solve(2) == 3"}, quick_limits());
  CHECK(r.reward == 0);
  CHECK(r.tests_passed == 0);
  CHECK(r.failure_detail.find("assert solve(1) == 2") != std::string::npos);
}

TEST_CASE("import-time errors score 0 with no tests passed") {
  JudgeResult r = shared_runner().run_unit_tests(
      "raise RuntimeError('nope')\n", {"assert True"}, quick_limits());
  CHECK(r.reward == 0);
  CHECK(r.tests_passed == 0);
  CHECK(r.failure_detail.find("import time") != std::string::npos);
}

TEST_CASE("judging is deterministic over repeats") {
  const std::string code = "def solve(x):\n    return x + 1\n";
  std::vector<std::string> tests = {"assert solve(1) == 2"};
  int first = shared_runner().run_unit_tests(code, tests, quick_limits()).reward;
  for (int i = 0; i < 20; ++i)
    CHECK(shared_runner().run_unit_tests(code, tests, quick_limits()).reward ==
          first);
}

TEST_CASE("writes outside the working directory are denied and absent") {
  // the judged program tries to plant a file next to its workdir
  const std::string marker =
      "/tmp/codesynth-escape-" + std::to_string(::getpid()) + ".txt";
  const std::string code =
      "def solve(x):\n"
      "    open('" + marker + "', 'w').write('leak')\n"
      "    return x\n";
  JudgeResult r = shared_runner().run_unit_tests(
      code, {"assert solve(1) == 1"}, quick_limits());
  CHECK(r.reward == 0);
  CHECK_FALSE(fs::exists(marker));
}

TEST_CASE("writes inside the working directory are allowed") {
  const std::string code =
      "def solve(x):\n"
      "    open('scratch.txt', 'w').write('ok')\n"
      "    return open('scratch.txt').read()\n";
  JudgeResult r = shared_runner().run_unit_tests(
      code, {"assert solve(0) == 'ok'"}, quick_limits());
  CHECK(r.reward == 1);
}

TEST_CASE("socket creation and process spawning are denied") {
  JudgeResult sock = shared_runner().run_unit_tests(
      "import socket\ndef solve(x):\n    socket.socket()\n    return x\n",
      {"assert solve(1) == 1"}, quick_limits());
  CHECK(sock.reward == 0);
  JudgeResult spawn = shared_runner().run_unit_tests(
      "import os\ndef solve(x):\n    os.system('true')\n    return x\n",
      {"assert solve(1) == 1"}, quick_limits());
  CHECK(spawn.reward == 0);
}

TEST_CASE("stdout noise from the judged code does not break the protocol") {
  JudgeResult r = shared_runner().run_unit_tests(
      "print('garbage')\ndef solve(x):\n    print('more')\n    return x\n",
      {"assert solve(5) == 5"}, quick_limits());
  CHECK(r.reward == 1);
}

TEST_CASE("execute_chain maps stage records to atom ids") {
  AtomicFunction inc;
  inc.id = "inc_atom";
  inc.topic = "math";
  inc.prompt = "increment";
  inc.fn_name = "inc";
  inc.input_type = ValueType::Int;
  inc.output_type = ValueType::Int;
  inc.code = "def inc(x):\n    return x + 1\n";
  AtomCorpus corpus({inc});

  SyntheticCandidate cand;
  cand.chain.atom_ids = {"inc_atom"};
  cand.chain.input_type = ValueType::Int;
  cand.chain.seed = 42;
  cand.response = assemble_response(cand.chain, corpus);
  cand.stage_fns = {"inc"};

  MockSet inputs;
  inputs.vtype = ValueType::Int;
  inputs.values = {{ValueType::Int, Json(1)}, {ValueType::Int, Json(2)}};
  auto traces = shared_runner().execute_chain(cand, inputs, quick_limits());
  REQUIRE(traces.size() == 2);
  CHECK(traces[0].stage_records[0].atom_id == "inc_atom");
  CHECK(traces[0].candidate_id == "42");
  CHECK(traces[1].final_output == Json(3));
}

TEST_CASE("validate_atom reports compile, run and type agreement") {
  const SandboxRunner& sb = shared_runner();

  AtomicFunction good;
  good.id = "good";
  good.fn_name = "f";
  good.input_type = ValueType::Int;
  good.output_type = ValueType::Str;
  good.code = "def f(x):\n    return str(x)\n";
  ValidationReport ok = validate_atom(good, sb);
  CHECK(ok.defines_fn);
  CHECK(ok.compiles);
  CHECK(ok.runs_ok);
  CHECK(ok.output_type_ok);
  CHECK(ok.fully_passing());

  AtomicFunction syntax = good;
  syntax.code = "def f(x:\n    return x\n";
  ValidationReport bad = validate_atom(syntax, sb);
  CHECK_FALSE(bad.compiles);
  CHECK_FALSE(bad.fully_passing());

  AtomicFunction mistyped = good;
  mistyped.code = "def f(x):\n    return x\n";  // Int in, Int out, Str declared
  ValidationReport mist = validate_atom(mistyped, sb);
  CHECK(mist.compiles);
  CHECK(mist.runs_ok);
  CHECK_FALSE(mist.output_type_ok);
  CHECK(mist.observed_type == "Int");
}

TEST_CASE("assertion literals evaluate back to their values in the corpus language") {
  // parse(render(v)) == v for 1e4 random values per type, checked by the
  // interpreter itself: one child per type compares each rendered literal
  // against the same value arriving through the interchange channel
  const SandboxRunner& sb = shared_runner();
  for (ValueType t : kAllValueTypes) {
    Rng rng(909 + static_cast<uint64_t>(t));
    std::vector<Json> inputs;
    std::string lits = "LITS = [\n";
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      MockValue v = mock_value(t, rng);
      inputs.push_back(v.payload);
      lits += py_literal(v.payload) + ",\n";
    }
    lits += "]\n";
    std::string code = lits +
                       "_i = -1\n"
                       "def check(x):\n"
                       "    global _i\n"
                       "    _i += 1\n"
                       "    return 1 if LITS[_i] == x else 0\n";
    ExecLimits limits;
    limits.wall_clock_ms = 120000;
    limits.max_output_bytes = 256u << 20;
    auto traces = sb.trace(code, {"check"}, inputs, limits);
    REQUIRE(traces.size() == static_cast<size_t>(n));
    size_t mismatches = 0;
    for (const auto& tr : traces)
      if (!(tr.ok() && tr.final_output == Json(1))) ++mismatches;
    CHECK(mismatches == 0);
  }
}

TEST_CASE("multi-stage traces agree with stage-at-a-time evaluation") {
  // independent route: run each stage as its own single-stage job and
  // thread the outputs through the orchestrator
  AtomCorpus corpus = load_corpus(CODESYNTH_SOURCE_DIR "/data/corpus");
  const SandboxRunner& sb = shared_runner();
  ComposeOptions opts;
  for (uint64_t i = 0; i < 20; ++i) {
    SyntheticCandidate cand = make_candidate(corpus, "", 6060, i, opts);
    Rng rng(seed_stream(6060, "oracle-mock", i));
    MockSet inputs = mock_input_sets(cand.chain.input_type, 10, rng);
    std::vector<ExecutionTrace> combined;
    try {
      combined = sb.execute_chain(cand, inputs, quick_limits());
    } catch (const SerializationError&) {
      continue;  // unencodable values abort both routes alike
    }

    std::vector<Json> values = inputs.payloads();
    std::vector<bool> alive(values.size(), true);
    for (size_t s = 0; s < cand.stage_fns.size(); ++s) {
      const AtomicFunction& atom = corpus.by_id(cand.chain.atom_ids[s]);
      std::vector<size_t> ks;
      std::vector<Json> stage_inputs;
      for (size_t k = 0; k < values.size(); ++k)
        if (alive[k]) {
          ks.push_back(k);
          stage_inputs.push_back(values[k]);
        }
      if (stage_inputs.empty()) break;
      std::vector<ExecutionTrace> stage_traces;
      try {
        stage_traces =
            sb.trace(atom.code, {atom.fn_name}, stage_inputs, quick_limits());
      } catch (const SerializationError&) {
        for (size_t k : ks) alive[k] = false;
        break;
      }
      for (size_t j = 0; j < ks.size(); ++j) {
        if (stage_traces[j].ok())
          values[ks[j]] = stage_traces[j].final_output;
        else
          alive[ks[j]] = false;
      }
    }
    for (size_t k = 0; k < values.size(); ++k) {
      if (combined[k].ok() && alive[k])
        CHECK(combined[k].final_output == values[k]);
      else
        CHECK(combined[k].ok() == alive[k]);
    }
  }
}

TEST_CASE("every reference corpus atom validates fully") {
  AtomCorpus corpus = load_corpus(CODESYNTH_SOURCE_DIR "/data/corpus");
  const SandboxRunner& sb = shared_runner();
  size_t failures = 0;
  for (const auto& a : corpus.atoms()) {
    ValidationReport rep = validate_atom(a, sb, quick_limits(), 1234);
    if (!rep.fully_passing()) {
      ++failures;
      MESSAGE(a.id << ": " << rep.detail);
    }
  }
  CHECK(failures == 0);
}
