#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "codesynth/atoms.hpp"
#include "codesynth/compose.hpp"
#include "codesynth/dedup.hpp"
#include "codesynth/filter.hpp"
#include "codesynth/sandbox.hpp"
#include "codesynth/worker_pool.hpp"

namespace codesynth {

enum class RecordKind { SFT, RL };

struct RecordMeta {
  std::string id;
  std::string dataset;
  std::vector<std::string> atoms;
  size_t length = 0;
  uint64_t seed = 0;
};

// One emitted training record: either <prompt, response> or
// <prompt, unit_tests>.
struct DatasetRecord {
  RecordKind kind = RecordKind::SFT;
  std::string prompt;
  std::string response;                  // SFT only
  std::vector<std::string> unit_tests;   // RL only
  RecordMeta meta;
};

// Builder artifact carrying everything known about a validated candidate,
// from which both record kinds are derived.
struct BuiltCandidate {
  std::string id;
  std::string prompt;
  std::string response;
  std::vector<std::string> unit_tests;
  RecordMeta meta;

  DatasetRecord to_sft_record() const;
  DatasetRecord to_rl_record() const;  // MissingTestsError without tests
};

// Optional record -> record hook applied before a record is written, for
// externally supplied prompt/response transforms. Identity when empty.
using RecordTransform = std::function<DatasetRecord(DatasetRecord)>;

struct BuildStats {
  size_t attempts = 0;
  size_t dead_ends = 0;
  size_t compile_errors = 0;
  size_t serialization_failures = 0;
  size_t sandbox_failures = 0;
  std::map<std::string, size_t> rejected_by_rule;
  size_t rejected_candidates = 0;
  size_t dup_exact = 0;
  size_t dup_near = 0;
  size_t kept = 0;
  std::map<size_t, size_t> kept_by_length;
  size_t self_check_failures = 0;

  void merge(const BuildStats& other);
  Json to_json() const;
};

struct BuildConfig {
  std::vector<size_t> lengths = {2, 3, 4};
  size_t mock_k = 10;
  TemplateSet templates;
  MockConfig mock;
  ExecLimits limits;
  FilterConfig filter;
  MinHashConfig dedup;
  size_t workers = 0;              // 0 = logical cores
  double attempt_multiplier = 50;  // attempt cap = max(1000, mult * target)
  bool self_check = false;         // judge every kept record's own response
};

struct BuildSetResult {
  std::string label;
  std::vector<BuiltCandidate> records;
  BuildStats stats;
  bool target_met = true;
};

// Composes, mocks, executes, filters and dedups candidates from `corpus`
// until `target` survive. Deterministic for a fixed (corpus, label, seed,
// config): workers only parallelize the sandbox jobs, order is restored
// before filtering and dedup.
BuildSetResult build_composite_set(const AtomCorpus& corpus,
                                   const std::string& label, size_t target,
                                   uint64_t master_seed,
                                   const BuildConfig& cfg,
                                   const SandboxRunner& sandbox);

struct BuildOutput {
  std::vector<BuiltCandidate> atom_base;
  BuildSetResult composite_a, composite_b, composite_c;
  Json stats_report() const;
};

// The full dataset shape: Atom_base from the whole corpus plus one composite
// set per partition, each built exclusively from its own partition's atoms.
BuildOutput build_datasets(const AtomCorpus& corpus,
                           const CorpusPartition& partition,
                           const std::array<size_t, 3>& targets,
                           uint64_t master_seed, const BuildConfig& cfg,
                           const SandboxRunner& sandbox);

std::vector<BuiltCandidate> atom_base_records(const AtomCorpus& corpus);

std::vector<DatasetRecord> to_sft_records(const std::vector<BuiltCandidate>& in);
std::vector<DatasetRecord> to_rl_records(const std::vector<BuiltCandidate>& in);

// ---- record files (one JSON record per line) ------------------------------

Json record_to_json(const DatasetRecord& r);
DatasetRecord record_from_json(const Json& j, const std::string& where);

void emit_records(const std::vector<DatasetRecord>& records,
                  const std::string& path,
                  const RecordTransform& transform = {});
std::vector<DatasetRecord> load_records(const std::string& path);

Json candidate_to_json(const BuiltCandidate& c);
BuiltCandidate candidate_from_json(const Json& j, const std::string& where);
void emit_candidates(const std::vector<BuiltCandidate>& cands,
                     const std::string& path);
std::vector<BuiltCandidate> load_candidates(const std::string& path);

// ---- mixing ----------------------------------------------------------------

struct MixtureComponent {
  std::string path;       // dataset file (or bare name resolved by the CLI)
  uint64_t rate_ppm = 0;  // percentage in parts-per-million of the dataset
  uint64_t seed = 0;
};

struct MixtureSpec {
  std::vector<MixtureComponent> components;
  uint64_t seed = 0;
};

// Parses "composite_a=1%,atom_base=600%"; rates accept up to four decimal
// places. Component seeds are derived from the spec seed.
MixtureSpec parse_mixture_spec(const std::string& text, uint64_t seed);

// floor(rate * n / 100%): full copies for each whole 100%, plus a
// without-replacement sample for the remainder, then one seeded shuffle.
size_t mixture_take_count(size_t n, uint64_t rate_ppm);

std::vector<DatasetRecord> mix(
    const MixtureSpec& spec,
    const std::function<std::vector<DatasetRecord>(const std::string&)>& load);

}  // namespace codesynth
