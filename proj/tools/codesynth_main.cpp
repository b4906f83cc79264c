// codesynth command line: partition a corpus, synthesize validated composite
// datasets, dedup, emit SFT/RL record files, mix datasets, evaluate response
// dumps, serve the judge and report statistics.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "codesynth/atoms.hpp"
#include "codesynth/dataset.hpp"
#include "codesynth/errors.hpp"
#include "codesynth/eval.hpp"
#include "codesynth/sandbox.hpp"
#include "codesynth/service.hpp"
#include "codesynth/version.hpp"

namespace fs = std::filesystem;
using namespace codesynth;

namespace {

Json g_config;  // values from --config override flags

void load_config(const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path);
  g_config = Json::parse(in);
}

template <typename T>
void cfg_override(const char* key, T& value) {
  if (g_config.is_object() && g_config.contains(key))
    value = g_config[key].get<T>();
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return Json::parse(in);
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
}

// Every artifact-producing run records how to reproduce itself.
void write_manifest(const std::string& primary_out, const std::string& command,
                    const std::vector<std::string>& argv, const Json& config,
                    const std::vector<std::string>& outputs) {
  Json m;
  m["tool"] = kToolName;
  m["version"] = kToolVersion;
  m["command"] = command;
  m["argv"] = argv;
  m["config"] = config;
  m["outputs"] = outputs;
  write_json_file(primary_out + ".manifest.json", m);
}

std::vector<size_t> parse_size_list(const std::string& text) {
  std::vector<size_t> out;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stoull(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

std::string resolve_dataset_path(const std::string& name,
                                 const std::string& dir) {
  if (fs::exists(name)) return name;
  for (const char* suffix : {".jsonl", ".sft.jsonl", ".rl.jsonl", ""}) {
    fs::path p = fs::path(dir) / (name + suffix);
    if (fs::exists(p)) return p.string();
  }
  throw IoError("cannot resolve dataset '" + name + "' under '" + dir + "'");
}

struct ComposeArgs {
  std::string corpus_path;
  std::string partition_path;
  std::string out_dir = ".";
  std::string templates_path;
  std::string lengths = "2,3,4";
  std::string counts = "5000,5000,1000";
  size_t count = 0;  // used when no partition is given
  uint64_t seed = 0;
  size_t mock_k = 10;
  size_t workers = 0;
  int64_t wall_clock_ms = 5000;
  std::string identity_rule = "all";
  double attempt_multiplier = 50;
  bool self_check = false;
  bool emit_records_too = false;
};

int run_compose(const ComposeArgs& a, const std::vector<std::string>& argv) {
  ComposeArgs args = a;
  cfg_override("seed", args.seed);
  cfg_override("mock-k", args.mock_k);
  cfg_override("lengths", args.lengths);
  cfg_override("counts", args.counts);
  cfg_override("workers", args.workers);
  cfg_override("wall-clock-ms", args.wall_clock_ms);
  cfg_override("identity-rule", args.identity_rule);

  AtomCorpus corpus = load_corpus(args.corpus_path);
  BuildConfig cfg;
  cfg.lengths = parse_size_list(args.lengths);
  cfg.mock_k = args.mock_k;
  cfg.workers = args.workers;
  cfg.limits.wall_clock_ms = args.wall_clock_ms;
  cfg.filter.identity_rule =
      args.identity_rule == "any" ? IdentityRule::Any : IdentityRule::All;
  cfg.attempt_multiplier = args.attempt_multiplier;
  cfg.self_check = args.self_check;
  if (!args.templates_path.empty())
    cfg.templates = load_template_set(args.templates_path);

  SandboxRunner sandbox;
  fs::create_directories(args.out_dir);
  std::vector<std::string> outputs;

  Json config;
  config["corpus"] = args.corpus_path;
  config["corpus_hash"] = corpus.content_hash();
  config["seed"] = args.seed;
  config["lengths"] = args.lengths;
  config["mock_k"] = args.mock_k;
  config["wall_clock_ms"] = args.wall_clock_ms;
  config["identity_rule"] = args.identity_rule;
  config["templates"] = template_set_to_json(cfg.templates);

  auto emit_set = [&](const std::string& label,
                      const std::vector<BuiltCandidate>& records) {
    fs::path out = fs::path(args.out_dir) / (label + ".candidates.jsonl");
    emit_candidates(records, out.string());
    outputs.push_back(out.string());
    if (args.emit_records_too) {
      fs::path sft = fs::path(args.out_dir) / (label + ".sft.jsonl");
      emit_records(to_sft_records(records), sft.string());
      outputs.push_back(sft.string());
      if (!records.empty() && !records.front().unit_tests.empty()) {
        fs::path rl = fs::path(args.out_dir) / (label + ".rl.jsonl");
        emit_records(to_rl_records(records), rl.string());
        outputs.push_back(rl.string());
      }
    }
  };

  bool all_met = true;
  if (!args.partition_path.empty()) {
    CorpusPartition part =
        partition_from_json(read_json_file(args.partition_path));
    config["partition"] = args.partition_path;
    config["counts"] = args.counts;
    std::vector<size_t> counts = parse_size_list(args.counts);
    if (counts.size() != 3)
      throw ValidationError("--counts wants three comma-separated numbers");
    BuildOutput out = build_datasets(
        corpus, part, {counts[0], counts[1], counts[2]}, args.seed, cfg,
        sandbox);
    emit_set("atom_base", out.atom_base);
    emit_set("composite_a", out.composite_a.records);
    emit_set("composite_b", out.composite_b.records);
    emit_set("composite_c", out.composite_c.records);
    all_met = out.composite_a.target_met && out.composite_b.target_met &&
              out.composite_c.target_met;
    fs::path stats = fs::path(args.out_dir) / "stats.json";
    write_json_file(stats.string(), out.stats_report());
    outputs.push_back(stats.string());
    std::cout << out.stats_report().dump(2) << "\n";
  } else {
    config["count"] = args.count;
    BuildSetResult res = build_composite_set(corpus, "composite", args.count,
                                             args.seed, cfg, sandbox);
    emit_set("composite", res.records);
    emit_set("atom_base", atom_base_records(corpus));
    all_met = res.target_met;
    fs::path stats = fs::path(args.out_dir) / "stats.json";
    Json sj;
    sj["composite"] = res.stats.to_json();
    sj["composite"]["target_met"] = res.target_met;
    write_json_file(stats.string(), sj);
    outputs.push_back(stats.string());
    std::cout << sj.dump(2) << "\n";
  }

  write_manifest((fs::path(args.out_dir) / "compose").string(), "compose",
                 argv, config, outputs);
  if (!all_met) {
    std::cerr << "warning: at least one set fell short of its target\n";
    return 1;
  }
  return 0;
}

volatile std::sig_atomic_t g_stop_requested = 0;

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> raw_argv(argv, argv + argc);
  CLI::App app{"compositional code-generation dataset toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file; its values override flags");

  // ---- partition ----
  auto* cmd_partition = app.add_subcommand(
      "partition", "split a corpus into disjoint sets A/B/C");
  std::string p_corpus, p_sizes = "34,33,33", p_out = "partition.json";
  uint64_t p_seed = 0;
  cmd_partition->add_option("--corpus", p_corpus, "corpus dir or manifest")
      ->required();
  cmd_partition->add_option("--sizes", p_sizes, "three sizes, e.g. 34,33,33");
  cmd_partition->add_option("--seed", p_seed, "shuffle seed");
  cmd_partition->add_option("--out", p_out, "output partition file");

  // ---- compose ----
  auto* cmd_compose = app.add_subcommand(
      "compose", "synthesize validated composite candidates");
  ComposeArgs c;
  cmd_compose->add_option("--corpus", c.corpus_path, "corpus dir or manifest")
      ->required();
  cmd_compose->add_option("--partition", c.partition_path,
                          "partition file; builds composite_a/b/c");
  cmd_compose->add_option("--counts", c.counts,
                          "targets for sets a,b,c (with --partition)");
  cmd_compose->add_option("--count", c.count,
                          "target count (without --partition)");
  cmd_compose->add_option("--lengths", c.lengths, "allowed chain lengths");
  cmd_compose->add_option("--seed", c.seed, "master seed");
  cmd_compose->add_option("--mock-k", c.mock_k, "mock input sets per candidate");
  cmd_compose->add_option("--out-dir", c.out_dir, "output directory");
  cmd_compose->add_option("--workers", c.workers,
                          "sandbox workers (0 = logical cores)");
  cmd_compose->add_option("--wall-clock-ms", c.wall_clock_ms,
                          "sandbox wall clock per job");
  cmd_compose->add_option("--identity-rule", c.identity_rule,
                          "identity filter scope: all|any");
  cmd_compose->add_option("--templates", c.templates_path,
                          "prompt connective template file");
  cmd_compose->add_option("--attempt-multiplier", c.attempt_multiplier,
                          "attempt cap as a multiple of the target");
  cmd_compose->add_flag("--self-check", c.self_check,
                        "judge every kept record against its own tests");
  cmd_compose->add_flag("--emit", c.emit_records_too,
                        "also write .sft.jsonl/.rl.jsonl record files");

  // ---- dedup ----
  auto* cmd_dedup =
      app.add_subcommand("dedup", "exact + MinHash near-duplicate removal");
  std::string d_in, d_out;
  MinHashConfig d_cfg;
  cmd_dedup->add_option("--in", d_in, "input records jsonl")->required();
  cmd_dedup->add_option("--out", d_out, "output records jsonl")->required();
  cmd_dedup->add_option("--threshold", d_cfg.similarity_threshold,
                        "near-duplicate similarity threshold");
  cmd_dedup->add_option("--shingle-width", d_cfg.shingle_width,
                        "tokens per shingle");
  cmd_dedup->add_option("--permutations", d_cfg.num_permutations,
                        "MinHash permutations");
  cmd_dedup->add_option("--bands", d_cfg.lsh_bands, "LSH bands");
  cmd_dedup->add_option("--hash-seed", d_cfg.hash_seed, "hash seed");

  // ---- emit ----
  auto* cmd_emit = app.add_subcommand(
      "emit", "convert candidate files to SFT or RL record files");
  std::string e_in, e_out, e_format = "sft";
  cmd_emit->add_option("--in", e_in, "candidates jsonl")->required();
  cmd_emit->add_option("--format", e_format, "sft|rl")->required();
  cmd_emit->add_option("--out", e_out, "output records jsonl")->required();

  // ---- mix ----
  auto* cmd_mix = app.add_subcommand(
      "mix", "weighted mixture with down/up-sampling, e.g. "
             "\"composite_a=1%,atom_base=600%\"");
  std::string m_spec, m_dir = ".", m_out = "mixed.jsonl";
  uint64_t m_seed = 0;
  cmd_mix->add_option("--spec", m_spec, "name=rate% pairs")->required();
  cmd_mix->add_option("--dir", m_dir, "directory for bare dataset names");
  cmd_mix->add_option("--seed", m_seed, "sampling/shuffle seed");
  cmd_mix->add_option("--out", m_out, "output records jsonl");

  // ---- eval ----
  auto* cmd_eval =
      app.add_subcommand("eval", "zero-shot pass@1 over a response dump");
  std::string v_dataset, v_responses, v_out, v_label;
  size_t v_workers = 0;
  int64_t v_wall = 5000;
  cmd_eval->add_option("--dataset", v_dataset, "RL records jsonl")->required();
  cmd_eval->add_option("--responses", v_responses, "responses jsonl")
      ->required();
  cmd_eval->add_option("--out", v_out, "report json path");
  cmd_eval->add_option("--label", v_label, "dataset label for the table");
  cmd_eval->add_option("--workers", v_workers, "judge workers");
  cmd_eval->add_option("--wall-clock-ms", v_wall, "per-judgement wall clock");

  // ---- serve ----
  auto* cmd_serve = app.add_subcommand("serve", "run the judge service");
  std::string s_bind = "127.0.0.1:8077";
  ServicePolicy s_policy;
  cmd_serve->add_option("--bind", s_bind, "host:port");
  cmd_serve->add_option("--pool", s_policy.pool_size, "concurrent judge jobs");
  cmd_serve->add_option("--queue-bound", s_policy.queue_bound,
                        "waiting-request bound (0 = 4x pool)");
  cmd_serve->add_option("--wall-clock-cap-ms", s_policy.wall_clock_cap_ms,
                        "upper bound for per-request wall clock overrides");

  // ---- stats ----
  auto* cmd_stats =
      app.add_subcommand("stats", "summarize a records or candidates file");
  std::string t_in;
  cmd_stats->add_option("--in", t_in, "records jsonl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    load_config(config_path);

    if (cmd_partition->parsed()) {
      cfg_override("seed", p_seed);
      cfg_override("sizes", p_sizes);
      AtomCorpus corpus = load_corpus(p_corpus);
      std::vector<size_t> sizes = parse_size_list(p_sizes);
      if (sizes.size() != 3)
        throw ValidationError("--sizes wants three comma-separated numbers");
      CorpusPartition part =
          partition_corpus(corpus, {sizes[0], sizes[1], sizes[2]}, p_seed);
      write_json_file(p_out, partition_to_json(part));
      Json config;
      config["corpus"] = p_corpus;
      config["corpus_hash"] = corpus.content_hash();
      config["sizes"] = p_sizes;
      config["seed"] = p_seed;
      write_manifest(p_out, "partition", raw_argv, config, {p_out});
      std::cout << "wrote " << p_out << " (" << part.set_a.size() << "/"
                << part.set_b.size() << "/" << part.set_c.size() << ")\n";
      return 0;
    }

    if (cmd_compose->parsed()) return run_compose(c, raw_argv);

    if (cmd_dedup->parsed()) {
      std::vector<DatasetRecord> in = load_records(d_in);
      Deduper deduper(d_cfg);
      std::vector<DatasetRecord> kept;
      for (const auto& r : in) {
        std::vector<std::string> parts = {r.prompt};
        if (!r.response.empty()) parts.push_back(r.response);
        for (const auto& t : r.unit_tests) parts.push_back(t);
        if (deduper.offer(canonical_key_parts(parts)) == DedupOutcome::Kept)
          kept.push_back(r);
      }
      emit_records(kept, d_out);
      Json rep;
      rep["input"] = in.size();
      rep["kept"] = deduper.report().kept;
      rep["exact"] = deduper.report().exact;
      rep["near"] = deduper.report().near;
      std::cout << rep.dump(2) << "\n";
      Json config;
      config["in"] = d_in;
      config["threshold"] = d_cfg.similarity_threshold;
      config["shingle_width"] = d_cfg.shingle_width;
      config["permutations"] = d_cfg.num_permutations;
      config["bands"] = d_cfg.lsh_bands;
      config["hash_seed"] = d_cfg.hash_seed;
      write_manifest(d_out, "dedup", raw_argv, config, {d_out});
      return 0;
    }

    if (cmd_emit->parsed()) {
      std::vector<BuiltCandidate> cands = load_candidates(e_in);
      std::vector<DatasetRecord> records;
      if (e_format == "sft")
        records = to_sft_records(cands);
      else if (e_format == "rl")
        records = to_rl_records(cands);
      else
        throw ValidationError("--format must be sft or rl");
      emit_records(records, e_out);
      Json config;
      config["in"] = e_in;
      config["format"] = e_format;
      write_manifest(e_out, "emit", raw_argv, config, {e_out});
      std::cout << "wrote " << records.size() << " records to " << e_out
                << "\n";
      return 0;
    }

    if (cmd_mix->parsed()) {
      cfg_override("seed", m_seed);
      MixtureSpec spec = parse_mixture_spec(m_spec, m_seed);
      std::vector<DatasetRecord> mixed = mix(spec, [&](const std::string& n) {
        return load_records(resolve_dataset_path(n, m_dir));
      });
      emit_records(mixed, m_out);
      Json config;
      config["spec"] = m_spec;
      config["dir"] = m_dir;
      config["seed"] = m_seed;
      write_manifest(m_out, "mix", raw_argv, config, {m_out});
      std::cout << "wrote " << mixed.size() << " records to " << m_out << "\n";
      return 0;
    }

    if (cmd_eval->parsed()) {
      std::vector<DatasetRecord> dataset = load_records(v_dataset);
      ResponseFile responses = load_response_file(v_responses);
      SandboxRunner sandbox;
      ExecLimits limits;
      limits.wall_clock_ms = v_wall;
      EvalReport rep =
          evaluate(dataset, responses, limits, v_workers, sandbox,
                   v_label.empty() ? v_dataset : v_label);
      std::cout << summarize({rep});
      if (!v_out.empty()) {
        write_json_file(v_out, rep.to_json());
        Json config;
        config["dataset"] = v_dataset;
        config["responses"] = v_responses;
        config["wall_clock_ms"] = v_wall;
        write_manifest(v_out, "eval", raw_argv, config, {v_out});
      }
      return 0;
    }

    if (cmd_serve->parsed()) {
      size_t colon = s_bind.rfind(':');
      if (colon == std::string::npos)
        throw ValidationError("--bind wants host:port");
      const std::string host = s_bind.substr(0, colon);
      const int port = std::stoi(s_bind.substr(colon + 1));
      JudgeService service(s_policy);
      int bound = service.start(host, port);
      std::cout << "judge service listening on " << host << ":" << bound
                << " (pool " << s_policy.pool_size << ", queue bound "
                << s_policy.effective_queue_bound() << ")\n";
      std::signal(SIGINT, [](int) { g_stop_requested = 1; });
      std::signal(SIGTERM, [](int) { g_stop_requested = 1; });
      while (!g_stop_requested)
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      std::cout << "draining...\n";
      service.stop();
      return 0;
    }

    if (cmd_stats->parsed()) {
      std::vector<DatasetRecord> records;
      try {
        records = load_records(t_in);
      } catch (const SchemaViolationError&) {
        // fall back to candidate files
        for (const auto& cand : load_candidates(t_in))
          records.push_back(cand.unit_tests.empty() ? cand.to_sft_record()
                                                    : cand.to_rl_record());
      }
      Json j;
      j["records"] = records.size();
      std::map<std::string, size_t> by_kind, by_dataset;
      std::map<size_t, size_t> by_length;
      for (const auto& r : records) {
        ++by_kind[r.kind == RecordKind::SFT ? "SFT" : "RL"];
        ++by_dataset[r.meta.dataset.empty() ? "(none)" : r.meta.dataset];
        ++by_length[r.meta.length];
      }
      Json kinds = Json::object(), datasets = Json::object(),
           lengths = Json::object();
      for (auto& [k, v] : by_kind) kinds[k] = v;
      for (auto& [k, v] : by_dataset) datasets[k] = v;
      for (auto& [k, v] : by_length) lengths[std::to_string(k)] = v;
      j["by_kind"] = kinds;
      j["by_dataset"] = datasets;
      j["by_length"] = lengths;
      std::cout << j.dump(2) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
