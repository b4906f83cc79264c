#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "codesynth/value.hpp"

namespace codesynth {

struct MinHashConfig {
  size_t shingle_width = 5;      // tokens per shingle
  size_t num_permutations = 128;
  size_t lsh_bands = 32;         // num_permutations / lsh_bands rows per band
  double similarity_threshold = 0.85;
  uint64_t hash_seed = 0;

  void validate() const;
};

struct Signature {
  std::vector<uint64_t> minima;
};

// Normalized dedup key: the record's text fields concatenated, whitespace
// runs collapsed to single spaces, trailing space trimmed.
std::string canonical_key(const std::string& prompt, const std::string& response);
std::string canonical_key_parts(const std::vector<std::string>& parts);

Signature minhash_signature(const std::string& text, const MinHashConfig& cfg);

// Fraction of matching components; unbiased estimate of shingle-set Jaccard.
double estimate_similarity(const Signature& a, const Signature& b);

enum class DedupOutcome { Kept, ExactDuplicate, NearDuplicate };

struct DedupReport {
  size_t kept = 0;
  size_t exact = 0;
  size_t near = 0;
};

// Streaming first-wins index: exact matching on the canonical key plus
// LSH-banded MinHash with verification against the configured threshold.
// Insertion order defines which record survives.
class Deduper {
 public:
  explicit Deduper(MinHashConfig cfg = {});

  // Decides for one key text; Kept inserts it into the index.
  DedupOutcome offer(const std::string& key_text);

  // Split form for pipelines that decide and insert at different times:
  // check() never mutates the index, commit() registers a kept record.
  DedupOutcome check(const std::string& key_text, const Signature& sig) const;
  void commit(const std::string& key_text, Signature sig);

  Signature signature_of(const std::string& key_text) const;

  const DedupReport& report() const { return report_; }
  DedupReport& report() { return report_; }
  const MinHashConfig& config() const { return cfg_; }

 private:
  std::vector<uint64_t> band_keys(const Signature& sig) const;

  MinHashConfig cfg_;
  std::unordered_set<std::string> exact_;
  std::vector<Signature> signatures_;
  std::unordered_map<uint64_t, std::vector<size_t>> buckets_;
  DedupReport report_;
};

}  // namespace codesynth
