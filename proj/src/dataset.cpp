#include "codesynth/dataset.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

#include "codesynth/errors.hpp"
#include "codesynth/rng.hpp"

namespace codesynth {

DatasetRecord BuiltCandidate::to_sft_record() const {
  DatasetRecord r;
  r.kind = RecordKind::SFT;
  r.prompt = prompt;
  r.response = response;
  r.meta = meta;
  return r;
}

DatasetRecord BuiltCandidate::to_rl_record() const {
  if (unit_tests.empty()) throw MissingTestsError(id);
  DatasetRecord r;
  r.kind = RecordKind::RL;
  r.prompt = prompt;
  r.unit_tests = unit_tests;
  r.meta = meta;
  return r;
}

void BuildStats::merge(const BuildStats& other) {
  attempts += other.attempts;
  dead_ends += other.dead_ends;
  compile_errors += other.compile_errors;
  serialization_failures += other.serialization_failures;
  sandbox_failures += other.sandbox_failures;
  for (const auto& [k, v] : other.rejected_by_rule) rejected_by_rule[k] += v;
  rejected_candidates += other.rejected_candidates;
  dup_exact += other.dup_exact;
  dup_near += other.dup_near;
  kept += other.kept;
  for (const auto& [k, v] : other.kept_by_length) kept_by_length[k] += v;
  self_check_failures += other.self_check_failures;
}

Json BuildStats::to_json() const {
  Json j;
  j["attempts"] = attempts;
  j["dead_ends"] = dead_ends;
  j["compile_errors"] = compile_errors;
  j["serialization_failures"] = serialization_failures;
  j["sandbox_failures"] = sandbox_failures;
  Json rules = Json::object();
  for (const auto& [k, v] : rejected_by_rule) rules[k] = v;
  j["rejected_by_rule"] = rules;
  j["rejected_candidates"] = rejected_candidates;
  j["dup_exact"] = dup_exact;
  j["dup_near"] = dup_near;
  j["kept"] = kept;
  Json lens = Json::object();
  for (const auto& [k, v] : kept_by_length) lens[std::to_string(k)] = v;
  j["kept_by_length"] = lens;
  j["self_check_failures"] = self_check_failures;
  return j;
}

namespace {

enum class JobStatus { Ok, DeadEnd, CompileError, SerializationFailure, SandboxFailure };

struct TraceOutcome {
  JobStatus status = JobStatus::Ok;
  std::vector<ExecutionTrace> traces;
  std::string detail;
};

struct Pending {
  uint64_t index = 0;
  bool dead_end = false;
  bool skipped_dup = false;        // duplicate already known at submit time
  DedupOutcome submit_outcome = DedupOutcome::Kept;
  SyntheticCandidate cand;
  std::string key;
  Signature sig;
  std::future<TraceOutcome> fut;
};

}  // namespace

BuildSetResult build_composite_set(const AtomCorpus& corpus,
                                   const std::string& label, size_t target,
                                   uint64_t master_seed, const BuildConfig& cfg,
                                   const SandboxRunner& sandbox) {
  BuildSetResult res;
  res.label = label;
  if (target == 0) return res;

  ComposeOptions copts;
  copts.lengths = cfg.lengths;
  copts.templates = cfg.templates;

  WorkerPool pool(cfg.workers);
  Deduper deduper(cfg.dedup);
  const size_t attempt_cap = std::max<size_t>(
      1000, static_cast<size_t>(cfg.attempt_multiplier * static_cast<double>(target)));
  const size_t window = pool.size() * 4;

  std::deque<Pending> inflight;
  uint64_t next_index = 0;
  size_t consecutive_spawn_failures = 0;

  auto submit_one = [&] {
    Pending p;
    p.index = next_index++;
    try {
      p.cand = make_candidate(corpus, label, master_seed, p.index, copts);
    } catch (const DeadEndError&) {
      p.dead_end = true;
      inflight.push_back(std::move(p));
      return;
    } catch (const EmptyCorpusError&) {
      p.dead_end = true;
      inflight.push_back(std::move(p));
      return;
    }
    p.key = canonical_key(p.cand.prompt, p.cand.response);
    p.sig = deduper.signature_of(p.key);
    // a duplicate against already-kept records stays a duplicate, so the
    // sandbox run can be skipped up front; the authoritative re-check for
    // everything else happens at consume time, in submission order
    DedupOutcome early = deduper.check(p.key, p.sig);
    if (early != DedupOutcome::Kept) {
      p.skipped_dup = true;
      p.submit_outcome = early;
      inflight.push_back(std::move(p));
      return;
    }
    const SyntheticCandidate cand = p.cand;  // copy into the job
    const uint64_t mock_seed =
        seed_stream(master_seed, "mock:" + label, p.index);
    const BuildConfig* c = &cfg;
    const SandboxRunner* sb = &sandbox;
    p.fut = pool.submit([cand, mock_seed, c, sb]() -> TraceOutcome {
      TraceOutcome o;
      try {
        Rng rng(mock_seed);
        MockSet mock =
            mock_input_sets(cand.chain.input_type, c->mock_k, rng, c->mock);
        mock.seed = mock_seed;
        o.traces = sb->execute_chain(cand, mock, c->limits);
      } catch (const CompileError& e) {
        o.status = JobStatus::CompileError;
        o.detail = e.what();
      } catch (const SerializationError& e) {
        o.status = JobStatus::SerializationFailure;
        o.detail = e.what();
      } catch (const Error& e) {
        o.status = JobStatus::SandboxFailure;
        o.detail = e.what();
      }
      return o;
    });
    inflight.push_back(std::move(p));
  };

  while (res.records.size() < target && res.stats.attempts < attempt_cap) {
    while (inflight.size() < window && next_index < attempt_cap) submit_one();
    if (inflight.empty()) break;

    Pending p = std::move(inflight.front());
    inflight.pop_front();
    ++res.stats.attempts;

    if (p.dead_end) {
      ++res.stats.dead_ends;
      continue;
    }
    // authoritative dedup decision in submission order
    DedupOutcome outcome =
        p.skipped_dup ? p.submit_outcome : deduper.check(p.key, p.sig);
    if (outcome == DedupOutcome::ExactDuplicate) {
      ++res.stats.dup_exact;
      continue;
    }
    if (outcome == DedupOutcome::NearDuplicate) {
      ++res.stats.dup_near;
      continue;
    }

    TraceOutcome o = p.fut.get();
    switch (o.status) {
      case JobStatus::CompileError:
        ++res.stats.compile_errors;
        continue;
      case JobStatus::SerializationFailure:
        ++res.stats.serialization_failures;
        continue;
      case JobStatus::SandboxFailure:
        ++res.stats.sandbox_failures;
        if (++consecutive_spawn_failures >= 20)
          throw SandboxUnavailableError("20 consecutive sandbox failures: " +
                                        o.detail);
        continue;
      case JobStatus::Ok:
        break;
      default:
        continue;
    }
    consecutive_spawn_failures = 0;

    ValidityVerdict verdict = check_validity(o.traces, cfg.mock_k, cfg.filter);
    if (!verdict.accepted) {
      ++res.stats.rejected_candidates;
      for (Rule r : verdict.violated_rules)
        ++res.stats.rejected_by_rule[to_string(r)];
      continue;
    }

    UnitTestSet tests = emit_unit_tests(p.cand, o.traces, cfg.filter);
    deduper.commit(p.key, std::move(p.sig));

    BuiltCandidate rec;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "-%06zu", res.records.size());
    rec.id = label + idbuf;
    rec.prompt = std::move(p.cand.prompt);
    rec.response = std::move(p.cand.response);
    rec.unit_tests = std::move(tests.assertions);
    rec.meta.id = rec.id;
    rec.meta.dataset = label;
    rec.meta.atoms = p.cand.chain.atom_ids;
    rec.meta.length = p.cand.chain.atom_ids.size();
    rec.meta.seed = p.cand.chain.seed;
    ++res.stats.kept_by_length[rec.meta.length];
    res.records.push_back(std::move(rec));
  }
  res.stats.kept = res.records.size();
  res.target_met = res.records.size() >= target;

  if (cfg.self_check && !res.records.empty()) {
    std::vector<std::future<int>> futs;
    futs.reserve(res.records.size());
    const BuildConfig* c = &cfg;
    const SandboxRunner* sb = &sandbox;
    for (const auto& rec : res.records) {
      const BuiltCandidate* r = &rec;
      futs.push_back(pool.submit([r, c, sb]() -> int {
        try {
          return sb->run_unit_tests(r->response, r->unit_tests, c->limits).reward;
        } catch (const Error&) {
          return -1;
        }
      }));
    }
    for (auto& f : futs)
      if (f.get() != 1) ++res.stats.self_check_failures;
  }
  return res;
}

std::vector<BuiltCandidate> atom_base_records(const AtomCorpus& corpus) {
  std::vector<BuiltCandidate> out;
  out.reserve(corpus.size());
  for (const auto& a : corpus.atoms()) {
    BuiltCandidate r;
    r.id = "atom_base-" + a.id;
    r.prompt = a.prompt;
    r.response = a.code;
    r.meta = {r.id, "atom_base", {a.id}, 1, 0};
    out.push_back(std::move(r));
  }
  return out;
}

BuildOutput build_datasets(const AtomCorpus& corpus,
                           const CorpusPartition& partition,
                           const std::array<size_t, 3>& targets,
                           uint64_t master_seed, const BuildConfig& cfg,
                           const SandboxRunner& sandbox) {
  BuildOutput out;
  out.atom_base = atom_base_records(corpus);
  out.composite_a = build_composite_set(corpus.subset(partition.set_a),
                                        "composite_a", targets[0], master_seed,
                                        cfg, sandbox);
  out.composite_b = build_composite_set(corpus.subset(partition.set_b),
                                        "composite_b", targets[1], master_seed,
                                        cfg, sandbox);
  out.composite_c = build_composite_set(corpus.subset(partition.set_c),
                                        "composite_c", targets[2], master_seed,
                                        cfg, sandbox);
  return out;
}

Json BuildOutput::stats_report() const {
  Json j;
  j["atom_base"] = Json{{"kept", atom_base.size()}};
  j["composite_a"] = composite_a.stats.to_json();
  j["composite_a"]["target_met"] = composite_a.target_met;
  j["composite_b"] = composite_b.stats.to_json();
  j["composite_b"]["target_met"] = composite_b.target_met;
  j["composite_c"] = composite_c.stats.to_json();
  j["composite_c"]["target_met"] = composite_c.target_met;
  return j;
}

std::vector<DatasetRecord> to_sft_records(
    const std::vector<BuiltCandidate>& in) {
  std::vector<DatasetRecord> out;
  out.reserve(in.size());
  for (const auto& c : in) out.push_back(c.to_sft_record());
  return out;
}

std::vector<DatasetRecord> to_rl_records(
    const std::vector<BuiltCandidate>& in) {
  std::vector<DatasetRecord> out;
  out.reserve(in.size());
  for (const auto& c : in) out.push_back(c.to_rl_record());
  return out;
}

// ---- record files -----------------------------------------------------------

Json record_to_json(const DatasetRecord& r) {
  Json j;
  j["kind"] = r.kind == RecordKind::SFT ? "SFT" : "RL";
  j["prompt"] = r.prompt;
  if (r.kind == RecordKind::SFT)
    j["response"] = r.response;
  else
    j["unit_tests"] = r.unit_tests;
  Json meta;
  meta["id"] = r.meta.id;
  meta["dataset"] = r.meta.dataset;
  meta["atoms"] = r.meta.atoms;
  meta["length"] = r.meta.length;
  meta["seed"] = r.meta.seed;
  j["meta"] = meta;
  return j;
}

DatasetRecord record_from_json(const Json& j, const std::string& where) {
  auto fail = [&](const std::string& d) -> Error {
    return Error(where + ": " + d);
  };
  DatasetRecord r;
  if (!j.contains("kind") || !j["kind"].is_string())
    throw fail("missing kind field");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "SFT")
    r.kind = RecordKind::SFT;
  else if (kind == "RL")
    r.kind = RecordKind::RL;
  else
    throw fail("unknown kind '" + kind + "'");
  if (!j.contains("prompt") || !j["prompt"].is_string())
    throw fail("missing prompt field");
  r.prompt = j["prompt"].get<std::string>();
  if (r.kind == RecordKind::SFT) {
    if (!j.contains("response") || !j["response"].is_string() ||
        j["response"].get<std::string>().empty())
      throw fail("SFT record needs a non-empty response");
    if (j.contains("unit_tests")) throw fail("SFT record carries unit_tests");
    r.response = j["response"].get<std::string>();
  } else {
    if (!j.contains("unit_tests") || !j["unit_tests"].is_array())
      throw fail("RL record needs unit_tests");
    if (j.contains("response")) throw fail("RL record carries a response");
    for (const auto& t : j["unit_tests"]) {
      if (!t.is_string()) throw fail("unit_tests entries must be strings");
      r.unit_tests.push_back(t.get<std::string>());
    }
  }
  if (j.contains("meta") && j["meta"].is_object()) {
    const Json& m = j["meta"];
    r.meta.id = m.value("id", "");
    r.meta.dataset = m.value("dataset", "");
    if (m.contains("atoms"))
      r.meta.atoms = m["atoms"].get<std::vector<std::string>>();
    r.meta.length = m.value("length", size_t{0});
    r.meta.seed = m.value("seed", uint64_t{0});
  }
  return r;
}

void emit_records(const std::vector<DatasetRecord>& records,
                  const std::string& path, const RecordTransform& transform) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& r : records)
    out << record_to_json(transform ? transform(r) : r).dump() << "\n";
  if (!out) throw IoError("write failed for " + path);
}

std::vector<DatasetRecord> load_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::vector<DatasetRecord> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaViolationError(path, lineno, e.what());
    }
    try {
      out.push_back(record_from_json(j, "record"));
    } catch (const Error& e) {
      throw SchemaViolationError(path, lineno, e.what());
    }
  }
  return out;
}

Json candidate_to_json(const BuiltCandidate& c) {
  Json j;
  j["id"] = c.id;
  j["prompt"] = c.prompt;
  j["response"] = c.response;
  j["unit_tests"] = c.unit_tests;
  Json meta;
  meta["id"] = c.meta.id;
  meta["dataset"] = c.meta.dataset;
  meta["atoms"] = c.meta.atoms;
  meta["length"] = c.meta.length;
  meta["seed"] = c.meta.seed;
  j["meta"] = meta;
  return j;
}

BuiltCandidate candidate_from_json(const Json& j, const std::string& where) {
  BuiltCandidate c;
  for (const char* f : {"id", "prompt", "response", "unit_tests", "meta"})
    if (!j.contains(f)) throw Error(where + ": missing field " + f);
  c.id = j["id"].get<std::string>();
  c.prompt = j["prompt"].get<std::string>();
  c.response = j["response"].get<std::string>();
  c.unit_tests = j["unit_tests"].get<std::vector<std::string>>();
  const Json& m = j["meta"];
  c.meta.id = m.value("id", c.id);
  c.meta.dataset = m.value("dataset", "");
  if (m.contains("atoms"))
    c.meta.atoms = m["atoms"].get<std::vector<std::string>>();
  c.meta.length = m.value("length", size_t{0});
  c.meta.seed = m.value("seed", uint64_t{0});
  return c;
}

void emit_candidates(const std::vector<BuiltCandidate>& cands,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& c : cands) out << candidate_to_json(c).dump() << "\n";
  if (!out) throw IoError("write failed for " + path);
}

std::vector<BuiltCandidate> load_candidates(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::vector<BuiltCandidate> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(candidate_from_json(Json::parse(line), "candidate"));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaViolationError(path, lineno, e.what());
    } catch (const Error& e) {
      throw SchemaViolationError(path, lineno, e.what());
    }
  }
  return out;
}

// ---- mixing ----------------------------------------------------------------

namespace {

// exact ppm parse: "1" -> 10000, "0.5" -> 5000, "600" -> 6000000
uint64_t parse_rate_ppm(const std::string& s) {
  std::string t = s;
  if (!t.empty() && t.back() == '%') t.pop_back();
  size_t dot = t.find('.');
  std::string whole = dot == std::string::npos ? t : t.substr(0, dot);
  std::string frac = dot == std::string::npos ? "" : t.substr(dot + 1);
  if (whole.empty() && frac.empty())
    throw ValidationError("bad rate '" + s + "'");
  if (frac.size() > 4)
    throw ValidationError("rate '" + s + "' has more than 4 decimal places");
  for (char c : whole + frac)
    if (c < '0' || c > '9')
      throw ValidationError("bad rate '" + s + "'");
  uint64_t ppm = 0;
  for (char c : whole) ppm = ppm * 10 + static_cast<uint64_t>(c - '0');
  ppm *= 10000;
  uint64_t scale = 1000;
  for (char c : frac) {
    ppm += static_cast<uint64_t>(c - '0') * scale;
    scale /= 10;
  }
  return ppm;
}

}  // namespace

MixtureSpec parse_mixture_spec(const std::string& text, uint64_t seed) {
  MixtureSpec spec;
  spec.seed = seed;
  std::string cur;
  std::vector<std::string> parts;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  size_t idx = 0;
  for (const auto& part : parts) {
    size_t eq = part.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ValidationError("bad mixture component '" + part +
                            "' (want name=rate%)");
    MixtureComponent c;
    c.path = part.substr(0, eq);
    c.rate_ppm = parse_rate_ppm(part.substr(eq + 1));
    if (c.rate_ppm == 0)
      throw ValidationError("rate must be positive in '" + part + "'");
    c.seed = seed_stream(seed, "mix:" + c.path, idx++);
    spec.components.push_back(std::move(c));
  }
  if (spec.components.empty())
    throw ValidationError("empty mixture spec");
  return spec;
}

size_t mixture_take_count(size_t n, uint64_t rate_ppm) {
  // floor(n * rate / 100%) in exact integer arithmetic
  return static_cast<size_t>(
      (static_cast<unsigned __int128>(n) * rate_ppm) / 1000000u);
}

std::vector<DatasetRecord> mix(
    const MixtureSpec& spec,
    const std::function<std::vector<DatasetRecord>(const std::string&)>& load) {
  std::vector<DatasetRecord> out;
  for (const auto& comp : spec.components) {
    std::vector<DatasetRecord> records = load(comp.path);
    if (records.empty()) throw EmptyComponentError(comp.path);
    const size_t n = records.size();
    const size_t take = mixture_take_count(n, comp.rate_ppm);
    const size_t copies = take / n;
    const size_t remainder = take % n;

    for (size_t c = 0; c < copies; ++c)
      out.insert(out.end(), records.begin(), records.end());

    if (remainder > 0) {
      // partial Fisher-Yates: the first `remainder` slots are a uniform
      // without-replacement sample
      std::vector<size_t> idx(n);
      for (size_t i = 0; i < n; ++i) idx[i] = i;
      Rng rng(comp.seed);
      for (size_t i = 0; i < remainder; ++i) {
        size_t j = i + static_cast<size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
      }
      for (size_t i = 0; i < remainder; ++i) out.push_back(records[idx[i]]);
    }
  }
  Rng shuffle_rng(seed_stream(spec.seed, "mix-shuffle", 0));
  shuffle_rng.shuffle(out);
  return out;
}

}  // namespace codesynth
