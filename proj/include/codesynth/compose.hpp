#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "codesynth/atoms.hpp"
#include "codesynth/rng.hpp"

namespace codesynth {

// Connective templates for joining atom prompts. Each pattern must contain
// "{}" where the atom prompt is substituted; patterns are concatenated in
// chain order (first, middle*, last).
struct TemplateSet {
  std::string first = "{}";
  std::string middle = ", then {}";
  std::string last = ", then {}";
};

TemplateSet load_template_set(const std::string& path);
Json template_set_to_json(const TemplateSet& t);

// An ordered, type-compatible sequence of atoms.
struct Chain {
  std::vector<std::string> atom_ids;
  ValueType input_type = ValueType::Int;
  ValueType output_type = ValueType::Int;
  uint64_t seed = 0;

  size_t length() const { return atom_ids.size(); }
};

struct Provenance {
  std::string corpus_hash;
  std::string partition_label;  // "a", "b", "c" or "" for the full corpus
  uint64_t seed = 0;
};

struct SyntheticCandidate {
  Chain chain;
  std::string prompt;
  std::string response;  // defines the atoms plus one entry function "solve"
  std::vector<std::string> stage_fns;  // fn_name per stage, chain order
  Provenance provenance;
};

struct ComposeOptions {
  std::vector<size_t> lengths = {2, 3, 4};
  TemplateSet templates;
  // Whole-chain restarts allowed per candidate before DeadEnd /
  // ExhaustedRetries.
  size_t retry_budget = 50;
};

// Forward sampling: first atom uniform over the corpus, each successor
// uniform over atoms whose input type matches the previous output type,
// excluding the previous atom itself. Dead ends restart the whole chain;
// after `retry_budget` restarts DeadEndError is thrown.
Chain sample_chain(const AtomCorpus& corpus, size_t length, Rng& rng,
                   size_t retry_budget = 50);

// Each atom's definition once (in chain order, deduplicated) followed by a
// solve(x) function threading v1, v2, ... through the stages.
std::string assemble_response(const Chain& chain, const AtomCorpus& corpus);

std::string assemble_prompt(const Chain& chain, const AtomCorpus& corpus,
                            const TemplateSet& templates);

// Deterministic candidate for (corpus, label, master seed, index): the
// chain RNG stream is seed_stream(seed, "chain:" + label, index).
SyntheticCandidate make_candidate(const AtomCorpus& corpus,
                                  const std::string& partition_label,
                                  uint64_t master_seed, uint64_t index,
                                  const ComposeOptions& opts);

// n_target candidates with lengths drawn uniformly from opts.lengths.
// Throws ExhaustedRetriesError when a candidate cannot be sampled within
// the retry budget; the exception reports how many were produced.
std::vector<SyntheticCandidate> compose_candidates(const AtomCorpus& corpus,
                                                   size_t n_target,
                                                   uint64_t seed,
                                                   const ComposeOptions& opts);

}  // namespace codesynth
