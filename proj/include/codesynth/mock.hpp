#pragma once

#include <cstdint>
#include <vector>

#include "codesynth/rng.hpp"
#include "codesynth/value.hpp"

namespace codesynth {

// Sampling bounds for mocked inputs. Integers are drawn from [0, 999] and
// list lengths from [16, 64]; string length is not pinned by those rules and
// defaults to [1, 32].
struct MockConfig {
  int64_t int_min = 0;
  int64_t int_max = 999;
  int64_t list_len_min = 16;
  int64_t list_len_max = 64;
  int64_t str_len_min = 1;
  int64_t str_len_max = 32;
  int distinct_redraw_budget = 20;
};

// Character classes for string sampling: digits, letters, spaces and a
// mixture of them. One class is drawn uniformly per string.
enum class CharClass { Digits, Letters, Spaces, Mixture };

struct MockValue {
  ValueType vtype = ValueType::Int;
  Json payload;
};

struct MockSet {
  ValueType vtype = ValueType::Int;
  std::vector<MockValue> values;
  uint64_t seed = 0;

  size_t size() const { return values.size(); }
  std::vector<Json> payloads() const;
};

MockValue mock_value(ValueType t, Rng& rng, const MockConfig& cfg = {});

// k values of type t, pairwise distinct where the domain allows (re-draws up
// to cfg.distinct_redraw_budget, then accepts duplicates).
MockSet mock_input_sets(ValueType t, size_t k, Rng& rng,
                        const MockConfig& cfg = {});

}  // namespace codesynth
