#include "codesynth/dedup.hpp"

#include <algorithm>

#include "codesynth/errors.hpp"
#include "codesynth/rng.hpp"

namespace codesynth {

void MinHashConfig::validate() const {
  if (num_permutations == 0 || lsh_bands == 0 ||
      num_permutations % lsh_bands != 0)
    throw Error("num_permutations must be a positive multiple of lsh_bands");
  if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0))
    throw Error("similarity_threshold must be in (0, 1]");
  if (shingle_width == 0) throw Error("shingle_width must be positive");
}

std::string canonical_key_parts(const std::vector<std::string>& parts) {
  std::string out;
  bool pending_space = false;
  bool at_start = true;
  auto push = [&](const std::string& s) {
    for (char c : s) {
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
          c == '\v') {
        pending_space = true;
        continue;
      }
      if (pending_space && !at_start) out += ' ';
      pending_space = false;
      at_start = false;
      out += c;
    }
  };
  for (size_t i = 0; i < parts.size(); ++i) {
    push(parts[i]);
    pending_space = true;  // field boundary acts as whitespace
  }
  return out;  // trailing whitespace never emitted
}

std::string canonical_key(const std::string& prompt,
                          const std::string& response) {
  return canonical_key_parts({prompt, response});
}

namespace {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

// mix(a*x + b) gives one independent permutation-like hash per component
uint64_t permute(uint64_t base, uint64_t a, uint64_t b) {
  return splitmix64(a * base + b);
}

}  // namespace

Signature minhash_signature(const std::string& text,
                            const MinHashConfig& cfg) {
  cfg.validate();
  std::vector<std::string> tokens = tokenize(text);

  // base hashes of the shingle set; short texts form a single shingle
  std::vector<uint64_t> shingles;
  if (tokens.size() < cfg.shingle_width) {
    shingles.push_back(fnv1a64(text));
  } else {
    for (size_t i = 0; i + cfg.shingle_width <= tokens.size(); ++i) {
      std::string joined;
      for (size_t j = 0; j < cfg.shingle_width; ++j) {
        if (j) joined += ' ';
        joined += tokens[i + j];
      }
      shingles.push_back(fnv1a64(joined));
    }
    std::sort(shingles.begin(), shingles.end());
    shingles.erase(std::unique(shingles.begin(), shingles.end()),
                   shingles.end());
  }

  Rng rng(splitmix64(cfg.hash_seed ^ 0x5851f42d4c957f2dull));
  Signature sig;
  sig.minima.resize(cfg.num_permutations);
  std::vector<std::pair<uint64_t, uint64_t>> coeffs(cfg.num_permutations);
  for (auto& [a, b] : coeffs) {
    a = rng.next_u64() | 1;  // odd multiplier
    b = rng.next_u64();
  }
  for (size_t i = 0; i < cfg.num_permutations; ++i) {
    uint64_t mn = ~uint64_t{0};
    for (uint64_t s : shingles)
      mn = std::min(mn, permute(s, coeffs[i].first, coeffs[i].second));
    sig.minima[i] = mn;
  }
  return sig;
}

double estimate_similarity(const Signature& a, const Signature& b) {
  if (a.minima.size() != b.minima.size() || a.minima.empty())
    throw Error("signatures are not comparable");
  size_t match = 0;
  for (size_t i = 0; i < a.minima.size(); ++i)
    if (a.minima[i] == b.minima[i]) ++match;
  return static_cast<double>(match) / static_cast<double>(a.minima.size());
}

Deduper::Deduper(MinHashConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<uint64_t> Deduper::band_keys(const Signature& sig) const {
  const size_t rows = cfg_.num_permutations / cfg_.lsh_bands;
  std::vector<uint64_t> keys(cfg_.lsh_bands);
  for (size_t band = 0; band < cfg_.lsh_bands; ++band) {
    uint64_t h = fnv1a64("band") ^ splitmix64(band);
    for (size_t r = 0; r < rows; ++r)
      h = splitmix64(h ^ sig.minima[band * rows + r]);
    keys[band] = h;
  }
  return keys;
}

Signature Deduper::signature_of(const std::string& key_text) const {
  return minhash_signature(key_text, cfg_);
}

DedupOutcome Deduper::check(const std::string& key_text,
                            const Signature& sig) const {
  if (exact_.count(key_text)) return DedupOutcome::ExactDuplicate;

  // banded collisions are duplicates only when the verified estimate
  // reaches the threshold
  std::unordered_set<size_t> candidates;
  for (uint64_t bk : band_keys(sig)) {
    auto it = buckets_.find(bk);
    if (it == buckets_.end()) continue;
    for (size_t idx : it->second) candidates.insert(idx);
  }
  for (size_t idx : candidates)
    if (estimate_similarity(sig, signatures_[idx]) >=
        cfg_.similarity_threshold)
      return DedupOutcome::NearDuplicate;
  return DedupOutcome::Kept;
}

void Deduper::commit(const std::string& key_text, Signature sig) {
  const size_t my_idx = signatures_.size();
  for (uint64_t bk : band_keys(sig)) buckets_[bk].push_back(my_idx);
  signatures_.push_back(std::move(sig));
  exact_.insert(key_text);
}

DedupOutcome Deduper::offer(const std::string& key_text) {
  // exact hits skip the signature work entirely
  if (exact_.count(key_text)) {
    ++report_.exact;
    return DedupOutcome::ExactDuplicate;
  }
  Signature sig = minhash_signature(key_text, cfg_);
  DedupOutcome out = check(key_text, sig);
  switch (out) {
    case DedupOutcome::Kept:
      commit(key_text, std::move(sig));
      ++report_.kept;
      break;
    case DedupOutcome::ExactDuplicate:
      ++report_.exact;
      break;
    case DedupOutcome::NearDuplicate:
      ++report_.near;
      break;
  }
  return out;
}

}  // namespace codesynth
