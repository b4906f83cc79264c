#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "codesynth/value.hpp"

namespace fs = std::filesystem;
using codesynth::Json;

namespace {

const char* kBin = CODESYNTH_BIN;
const char* kCorpusDir = CODESYNTH_SOURCE_DIR "/data/corpus";

int run_cli(const std::string& args) {
  std::string cmd = std::string(kBin) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    char tmpl[] = "/tmp/codesynth-cli-XXXXXX";
    path = mkdtemp(tmpl);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("unknown subcommands exit 2, missing args exit 2") {
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("compose") == 2);  // --corpus is required
}

TEST_CASE("operational failures exit 1") {
  CHECK(run_cli("partition --corpus /nonexistent --out /tmp/x.json") == 1);
  CHECK(run_cli("stats --in /nonexistent.jsonl") == 1);
}

TEST_CASE("partition then compose twice is byte-identical") {
  TempDir dir;
  const std::string part = (dir.path / "part.json").string();
  REQUIRE(run_cli("partition --corpus " + std::string(kCorpusDir) +
                  " --sizes 34,33,33 --seed 5 --out " + part) == 0);

  auto compose_into = [&](const std::string& sub) {
    fs::path out = dir.path / sub;
    REQUIRE(run_cli("compose --corpus " + std::string(kCorpusDir) +
                    " --count 20 --lengths 2,3,4 --seed 7 --out-dir " +
                    out.string()) == 0);
    return out;
  };
  fs::path a = compose_into("a");
  fs::path b = compose_into("b");
  CHECK(slurp(a / "composite.candidates.jsonl") ==
        slurp(b / "composite.candidates.jsonl"));
  CHECK(slurp(a / "atom_base.candidates.jsonl") ==
        slurp(b / "atom_base.candidates.jsonl"));
  CHECK(fs::exists(a / "compose.manifest.json"));
  CHECK(fs::exists(a / "stats.json"));
}

TEST_CASE("emit produces SFT and RL record files; mix does the arithmetic") {
  TempDir dir;
  fs::path out = dir.path / "build";
  REQUIRE(run_cli("compose --corpus " + std::string(kCorpusDir) +
                  " --count 12 --seed 3 --out-dir " + out.string()) == 0);

  const std::string cands = (out / "composite.candidates.jsonl").string();
  REQUIRE(run_cli("emit --in " + cands + " --format sft --out " +
                  (out / "composite_a.jsonl").string()) == 0);
  REQUIRE(run_cli("emit --in " + cands + " --format rl --out " +
                  (out / "composite_rl.jsonl").string()) == 0);
  CHECK(run_cli("emit --in " + cands + " --format bogus --out /tmp/x") == 1);

  // atom_base as SFT records for the mixture
  REQUIRE(run_cli("emit --in " + (out / "atom_base.candidates.jsonl").string() +
                  " --format sft --out " + (out / "atom_base.jsonl").string()) ==
          0);

  // composite_a at 50% of 12 -> 6; atom_base at 300% of 100 -> 300
  REQUIRE(run_cli("mix --spec \"composite_a=50%,atom_base=300%\" --dir " +
                  out.string() + " --seed 1 --out " +
                  (out / "mixed.jsonl").string()) == 0);
  size_t lines = 0;
  std::ifstream in(out / "mixed.jsonl");
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 306);
  CHECK(fs::exists(out / "mixed.jsonl.manifest.json"));

  // manifest records the reproduction recipe
  Json manifest = Json::parse(slurp(out / "mixed.jsonl.manifest.json"));
  CHECK(manifest["command"] == "mix");
  CHECK(manifest["config"]["seed"] == 1);
}

TEST_CASE("config file values override flags") {
  TempDir dir;
  const std::string cfg = (dir.path / "cfg.json").string();
  std::ofstream(cfg) << R"({"sizes": "50,25,25"})";
  const std::string part = (dir.path / "part.json").string();
  REQUIRE(run_cli("--config " + cfg + " partition --corpus " +
                  std::string(kCorpusDir) + " --sizes 34,33,33 --seed 1 --out " +
                  part) == 0);
  Json j = Json::parse(slurp(part));
  CHECK(j["set_a"].size() == 50);  // config won over the flag
}
