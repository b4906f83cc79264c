#include "codesynth/eval.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "codesynth/errors.hpp"
#include "codesynth/worker_pool.hpp"

namespace codesynth {

ResponseFile load_response_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  ResponseFile rf;
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
    if (j.contains("decode_meta") && !j.contains("prompt_id")) {
      rf.decode_meta = j["decode_meta"];
      continue;
    }
    if (!j.contains("prompt_id") || !j["prompt_id"].is_string())
      throw SchemaViolationError(path, lineno, "missing prompt_id");
    if (!j.contains("response") || !j["response"].is_string())
      throw SchemaViolationError(path, lineno, "missing response");
    const std::string id = j["prompt_id"].get<std::string>();
    if (!rf.entries.emplace(id, j["response"].get<std::string>()).second)
      throw SchemaViolationError(path, lineno, "duplicate prompt_id " + id);
  }
  return rf;
}

Json EvalReport::to_json() const {
  Json j;
  j["dataset"] = dataset;
  j["n_prompts"] = n_prompts;
  j["n_passed"] = n_passed;
  j["pass_at_1"] = pass_at_1;
  Json per = Json::array();
  for (const auto& p : per_prompt) {
    Json e;
    e["id"] = p.id;
    e["reward"] = p.reward;
    e["failure_detail"] = p.failure_detail;
    per.push_back(std::move(e));
  }
  j["per_prompt"] = per;
  j["wall_time_ms"] = wall_time_ms;
  return j;
}

EvalReport evaluate(const std::vector<DatasetRecord>& dataset,
                    const ResponseFile& responses, const ExecLimits& limits,
                    size_t workers, const SandboxRunner& sandbox,
                    const std::string& dataset_label) {
  const auto t0 = std::chrono::steady_clock::now();

  // every record needs a resolvable id; files without meta ids get
  // positional ones
  std::vector<std::string> ids;
  std::set<std::string> id_set;
  ids.reserve(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) {
    std::string id = dataset[i].meta.id;
    if (id.empty()) id = "line-" + std::to_string(i + 1);
    ids.push_back(id);
    id_set.insert(id);
  }
  for (const auto& [rid, _] : responses.entries)
    if (!id_set.count(rid)) throw UnresolvedPromptIdError(rid);

  WorkerPool pool(workers);
  std::vector<std::future<PerPromptResult>> futs;
  futs.reserve(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) {
    const DatasetRecord* rec = &dataset[i];
    const std::string id = ids[i];
    const SandboxRunner* sb = &sandbox;
    const ExecLimits* lim = &limits;
    auto it = responses.entries.find(id);
    const bool have = it != responses.entries.end();
    const std::string response = have ? it->second : "";
    futs.push_back(pool.submit([rec, id, sb, lim, have,
                                response]() -> PerPromptResult {
      PerPromptResult r;
      r.id = id;
      if (!have) {
        r.reward = 0;
        r.failure_detail = "missing response";
        return r;
      }
      if (rec->unit_tests.empty()) {
        r.reward = 0;
        r.failure_detail = "record has no unit tests";
        return r;
      }
      try {
        JudgeResult jr = sb->run_unit_tests(extract_code_block(response),
                                            rec->unit_tests, *lim);
        r.reward = jr.reward;
        r.failure_detail = jr.failure_detail;
      } catch (const Error& e) {
        r.reward = 0;
        r.failure_detail = e.what();
      }
      return r;
    }));
  }

  EvalReport rep;
  rep.dataset = dataset_label;
  rep.n_prompts = dataset.size();
  for (auto& f : futs) rep.per_prompt.push_back(f.get());
  std::sort(rep.per_prompt.begin(), rep.per_prompt.end(),
            [](const PerPromptResult& a, const PerPromptResult& b) {
              return a.id < b.id;
            });
  for (const auto& p : rep.per_prompt)
    if (p.reward == 1) ++rep.n_passed;
  rep.pass_at_1 = rep.n_prompts == 0
                      ? 0.0
                      : static_cast<double>(rep.n_passed) /
                            static_cast<double>(rep.n_prompts);
  rep.wall_time_ms =
      std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

std::string summarize(const std::vector<EvalReport>& reports) {
  // disambiguate repeated labels with a run index
  std::map<std::string, size_t> seen;
  std::vector<std::string> labels;
  for (const auto& r : reports) {
    std::string label = r.dataset.empty() ? "(unnamed)" : r.dataset;
    size_t n = ++seen[label];
    if (n > 1) label += "#" + std::to_string(n);
    labels.push_back(label);
  }
  // second pass: suffix the first occurrence too when duplicated
  for (size_t i = 0; i < labels.size(); ++i) {
    const std::string base =
        reports[i].dataset.empty() ? "(unnamed)" : reports[i].dataset;
    if (seen[base] > 1 && labels[i] == base) labels[i] = base + "#1";
  }

  size_t w = std::string("dataset").size();
  for (const auto& l : labels) w = std::max(w, l.size());

  std::ostringstream out;
  out << std::left;
  out.width(static_cast<std::streamsize>(w));
  out << "dataset";
  out << "  n_prompts  n_passed  pass@1\n";
  char line[128];
  for (size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::snprintf(line, sizeof(line), "%-*s  %9zu  %8zu  %.4f\n",
                  static_cast<int>(w), labels[i].c_str(), r.n_prompts,
                  r.n_passed, r.pass_at_1);
    out << line;
  }
  return out.str();
}

}  // namespace codesynth
