#include "codesynth/mock.hpp"

#include <string>

namespace codesynth {

std::vector<Json> MockSet::payloads() const {
  std::vector<Json> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v.payload);
  return out;
}

namespace {

const std::string kDigits = "0123456789";
const std::string kLetters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
const std::string kSpaces = " ";
const std::string kMixture = kDigits + kLetters + kSpaces;

const std::string& alphabet(CharClass c) {
  switch (c) {
    case CharClass::Digits:
      return kDigits;
    case CharClass::Letters:
      return kLetters;
    case CharClass::Spaces:
      return kSpaces;
    case CharClass::Mixture:
      return kMixture;
  }
  return kMixture;
}

std::string mock_string(Rng& rng, const MockConfig& cfg) {
  const auto cls = static_cast<CharClass>(rng.below(4));
  const std::string& ab = alphabet(cls);
  const auto len =
      static_cast<size_t>(rng.range(cfg.str_len_min, cfg.str_len_max));
  std::string s;
  s.reserve(len);
  for (size_t i = 0; i < len; ++i)
    s += ab[static_cast<size_t>(rng.below(ab.size()))];
  return s;
}

}  // namespace

MockValue mock_value(ValueType t, Rng& rng, const MockConfig& cfg) {
  MockValue v;
  v.vtype = t;
  switch (t) {
    case ValueType::Int:
      v.payload = rng.range(cfg.int_min, cfg.int_max);
      break;
    case ValueType::Str:
      v.payload = mock_string(rng, cfg);
      break;
    case ValueType::ListInt: {
      const auto len =
          static_cast<size_t>(rng.range(cfg.list_len_min, cfg.list_len_max));
      Json arr = Json::array();
      for (size_t i = 0; i < len; ++i)
        arr.push_back(rng.range(cfg.int_min, cfg.int_max));
      v.payload = std::move(arr);
      break;
    }
    case ValueType::ListStr: {
      const auto len =
          static_cast<size_t>(rng.range(cfg.list_len_min, cfg.list_len_max));
      Json arr = Json::array();
      for (size_t i = 0; i < len; ++i) arr.push_back(mock_string(rng, cfg));
      v.payload = std::move(arr);
      break;
    }
  }
  return v;
}

MockSet mock_input_sets(ValueType t, size_t k, Rng& rng,
                        const MockConfig& cfg) {
  MockSet set;
  set.vtype = t;
  set.values.reserve(k);
  for (size_t i = 0; i < k; ++i) {
    MockValue v = mock_value(t, rng, cfg);
    for (int redraw = 0; redraw < cfg.distinct_redraw_budget; ++redraw) {
      bool dup = false;
      for (const auto& prev : set.values)
        if (prev.payload == v.payload) {
          dup = true;
          break;
        }
      if (!dup) break;
      v = mock_value(t, rng, cfg);
    }
    set.values.push_back(std::move(v));
  }
  return set;
}

}  // namespace codesynth
