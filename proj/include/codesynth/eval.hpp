#pragma once

#include <map>
#include <string>
#include <vector>

#include "codesynth/dataset.hpp"
#include "codesynth/sandbox.hpp"

namespace codesynth {

// Externally produced model responses, one per prompt id.
struct ResponseFile {
  std::map<std::string, std::string> entries;  // prompt_id -> response text
  Json decode_meta;                            // free-form, e.g. {"decoding":"greedy"}
};

// One record per line: {"prompt_id": ..., "response": ...}. A line carrying
// only decode_meta sets the file metadata. Duplicate ids are an error.
ResponseFile load_response_file(const std::string& path);

struct PerPromptResult {
  std::string id;
  int reward = 0;
  std::string failure_detail;
};

struct EvalReport {
  std::string dataset;
  size_t n_prompts = 0;
  size_t n_passed = 0;
  double pass_at_1 = 0.0;
  std::vector<PerPromptResult> per_prompt;  // ordered by prompt id
  double wall_time_ms = 0.0;

  Json to_json() const;
};

// Zero-shot pass@1: per prompt, extract the code block from the response and
// judge it against the record's unit tests. Prompts without a response score
// 0 and are flagged. Responses with ids that resolve to no record raise
// UnresolvedPromptIdError.
EvalReport evaluate(const std::vector<DatasetRecord>& dataset,
                    const ResponseFile& responses, const ExecLimits& limits,
                    size_t workers, const SandboxRunner& sandbox,
                    const std::string& dataset_label = "");

// Aligned text table of dataset x pass@1. Duplicate labels are suffixed
// with a run index.
std::string summarize(const std::vector<EvalReport>& reports);

}  // namespace codesynth
