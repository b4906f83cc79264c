#include "codesynth/compose.hpp"

#include <fstream>
#include <sstream>

#include "codesynth/errors.hpp"

namespace codesynth {

namespace {

std::string substitute(const std::string& pattern, const std::string& text,
                       const std::string& position) {
  size_t pos = pattern.find("{}");
  if (pos == std::string::npos) throw MissingTemplateError(position);
  return pattern.substr(0, pos) + text + pattern.substr(pos + 2);
}

std::string rstrip(const std::string& s) {
  size_t end = s.size();
  while (end > 0 && (s[end - 1] == '\n' || s[end - 1] == ' ' ||
                     s[end - 1] == '\t' || s[end - 1] == '\r'))
    --end;
  return s.substr(0, end);
}

}  // namespace

TemplateSet load_template_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read template set " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + std::string(e.what()));
  }
  TemplateSet t;
  for (const char* f : {"first", "middle", "last"})
    if (!j.contains(f) || !j[f].is_string()) throw MissingTemplateError(f);
  t.first = j["first"].get<std::string>();
  t.middle = j["middle"].get<std::string>();
  t.last = j["last"].get<std::string>();
  return t;
}

Json template_set_to_json(const TemplateSet& t) {
  Json j;
  j["first"] = t.first;
  j["middle"] = t.middle;
  j["last"] = t.last;
  return j;
}

Chain sample_chain(const AtomCorpus& corpus, size_t length, Rng& rng,
                   size_t retry_budget) {
  if (corpus.empty()) throw EmptyCorpusError();
  if (length < 2) throw Error("chain length must be >= 2");

  for (size_t attempt = 0;; ++attempt) {
    const auto& atoms = corpus.atoms();
    const AtomicFunction* current =
        &atoms[static_cast<size_t>(rng.below(atoms.size()))];

    Chain chain;
    chain.atom_ids.push_back(current->id);
    chain.input_type = current->input_type;

    bool dead_end = false;
    for (size_t i = 1; i < length; ++i) {
      auto pool = corpus.with_input_type(current->output_type);
      // no immediate self-repetition
      std::erase_if(pool, [&](const AtomicFunction* a) {
        return a->id == current->id;
      });
      if (pool.empty()) {
        dead_end = true;
        break;
      }
      current = pool[static_cast<size_t>(rng.below(pool.size()))];
      chain.atom_ids.push_back(current->id);
    }
    if (!dead_end) {
      chain.output_type = current->output_type;
      return chain;
    }
    if (attempt >= retry_budget)
      throw DeadEndError("no type-compatible successor after " +
                         std::to_string(attempt + 1) + " restarts");
  }
}

std::string assemble_response(const Chain& chain, const AtomCorpus& corpus) {
  std::ostringstream out;
  std::set<std::string> emitted;
  for (const auto& id : chain.atom_ids) {
    const AtomicFunction& a = corpus.by_id(id);  // UnknownAtomIdError
    if (emitted.insert(id).second) out << rstrip(a.code) << "\n\n";
  }

  out << "def solve(x):\n";
  std::string var = "x";
  for (size_t i = 0; i < chain.atom_ids.size(); ++i) {
    const AtomicFunction& a = corpus.by_id(chain.atom_ids[i]);
    std::string next = "v" + std::to_string(i + 1);
    out << "    " << next << " = " << a.fn_name << "(" << var << ")\n";
    var = next;
  }
  out << "    return " << var << "\n";
  return out.str();
}

std::string assemble_prompt(const Chain& chain, const AtomCorpus& corpus,
                            const TemplateSet& templates) {
  std::string out;
  const size_t n = chain.atom_ids.size();
  for (size_t i = 0; i < n; ++i) {
    const AtomicFunction& a = corpus.by_id(chain.atom_ids[i]);
    if (i == 0)
      out += substitute(templates.first, a.prompt, "first");
    else if (i + 1 == n)
      out += substitute(templates.last, a.prompt, "last");
    else
      out += substitute(templates.middle, a.prompt, "middle");
  }
  return out;
}

SyntheticCandidate make_candidate(const AtomCorpus& corpus,
                                  const std::string& partition_label,
                                  uint64_t master_seed, uint64_t index,
                                  const ComposeOptions& opts) {
  if (opts.lengths.empty()) throw Error("no chain lengths configured");
  const uint64_t chain_seed =
      seed_stream(master_seed, "chain:" + partition_label, index);
  Rng rng(chain_seed);
  const size_t length =
      opts.lengths[static_cast<size_t>(rng.below(opts.lengths.size()))];

  SyntheticCandidate cand;
  cand.chain = sample_chain(corpus, length, rng, opts.retry_budget);
  cand.chain.seed = chain_seed;
  cand.prompt = assemble_prompt(cand.chain, corpus, opts.templates);
  cand.response = assemble_response(cand.chain, corpus);
  for (const auto& id : cand.chain.atom_ids)
    cand.stage_fns.push_back(corpus.by_id(id).fn_name);
  cand.provenance = {corpus.content_hash(), partition_label, chain_seed};
  return cand;
}

std::vector<SyntheticCandidate> compose_candidates(const AtomCorpus& corpus,
                                                   size_t n_target,
                                                   uint64_t seed,
                                                   const ComposeOptions& opts) {
  std::vector<SyntheticCandidate> out;
  out.reserve(n_target);
  for (uint64_t index = 0; out.size() < n_target; ++index) {
    try {
      out.push_back(make_candidate(corpus, "", seed, index, opts));
    } catch (const DeadEndError&) {
      throw ExhaustedRetriesError(out.size(), n_target);
    } catch (const EmptyCorpusError&) {
      throw ExhaustedRetriesError(out.size(), n_target);
    }
  }
  return out;
}

}  // namespace codesynth
