#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "codesynth/value.hpp"

namespace codesynth {

// One handwritten typed building block: a prompt, a single function
// definition answering it, and declared input/output types.
struct AtomicFunction {
  std::string id;
  std::string topic;
  std::string prompt;
  std::string fn_name;
  ValueType input_type = ValueType::Int;
  ValueType output_type = ValueType::Int;
  std::string code;

  bool operator==(const AtomicFunction&) const = default;
};

// Default topic taxonomy, configurable at load time. Unknown topics are
// warnings, not errors.
std::vector<std::string> default_topics();

class AtomCorpus {
 public:
  AtomCorpus() = default;
  explicit AtomCorpus(std::vector<AtomicFunction> atoms);

  size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  const std::vector<AtomicFunction>& atoms() const { return atoms_; }

  const AtomicFunction& by_id(const std::string& id) const;  // UnknownAtomIdError
  bool contains(const std::string& id) const;

  // Atoms whose input_type is t, in corpus order.
  std::vector<const AtomicFunction*> with_input_type(ValueType t) const;

  // FNV hash over every atom's fields; identifies the corpus in provenance.
  std::string content_hash() const;

  // Restriction of this corpus to the given ids, preserving corpus order.
  AtomCorpus subset(const std::vector<std::string>& ids) const;

 private:
  std::vector<AtomicFunction> atoms_;
  std::map<std::string, size_t> index_;
  std::array<std::vector<size_t>, 4> by_input_type_;
};

struct CorpusPartition {
  std::vector<std::string> set_a, set_b, set_c;
  uint64_t seed = 0;

  const std::vector<std::string>& set_by_label(const std::string& label) const;
};

struct LoadOptions {
  std::vector<std::string> topics = default_topics();
  bool warn_unknown_topics = true;
};

// Loads a corpus from a manifest file or from a directory containing
// manifest.json. Throws MissingFieldError, DuplicateIdError,
// UnknownValueTypeError, UnparseableCodeError or IoError.
AtomCorpus load_corpus(const std::string& path, const LoadOptions& opts = {});

// Writes manifest.json plus one atoms/<id>.json file per atom.
void save_corpus(const AtomCorpus& corpus, const std::string& dir);

std::vector<const AtomicFunction*> atoms_with_input_type(const AtomCorpus& c,
                                                         ValueType t);

// Seeded shuffle then split by sizes. sizes must sum to the corpus size.
CorpusPartition partition_corpus(const AtomCorpus& corpus,
                                 const std::array<size_t, 3>& sizes,
                                 uint64_t seed);

Json partition_to_json(const CorpusPartition& p);
CorpusPartition partition_from_json(const Json& j);

}  // namespace codesynth
