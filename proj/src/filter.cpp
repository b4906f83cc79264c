#include "codesynth/filter.hpp"

#include "codesynth/errors.hpp"

namespace codesynth {

std::string to_string(Rule r) {
  switch (r) {
    case Rule::R1_RUNTIME_ERROR:
      return "R1_RUNTIME_ERROR";
    case Rule::R2_NONE_OUTPUT:
      return "R2_NONE_OUTPUT";
    case Rule::R3_IDENTITY_STAGE:
      return "R3_IDENTITY_STAGE";
    case Rule::R4_CONSTANT_OUTPUT:
      return "R4_CONSTANT_OUTPUT";
  }
  return "R1_RUNTIME_ERROR";
}

ValidityVerdict check_validity(const std::vector<ExecutionTrace>& traces,
                               size_t expected_k, const FilterConfig& cfg) {
  if (traces.size() != expected_k)
    throw IncompleteTracesError(traces.size(), expected_k);
  if (traces.empty()) throw IncompleteTracesError(0, 0);

  ValidityVerdict v;
  v.candidate_id = traces.front().candidate_id;

  // R1: any raised or timed-out stage (including job-level timeouts that
  // left no stage records)
  for (const auto& t : traces) {
    if (t.overall_status != StageStatus::OK) {
      v.violated_rules.insert(Rule::R1_RUNTIME_ERROR);
      break;
    }
    for (const auto& s : t.stage_records)
      if (s.status != StageStatus::OK) {
        v.violated_rules.insert(Rule::R1_RUNTIME_ERROR);
        break;
      }
  }

  // R2: any stage outputting null
  for (const auto& t : traces)
    for (const auto& s : t.stage_records)
      if (s.status == StageStatus::OK && s.output.is_null())
        v.violated_rules.insert(Rule::R2_NONE_OUTPUT);

  // R3: identity stage. Equality is deep structural equality on decoded
  // values. Under IdentityRule::All a position must be identity in every
  // trace (positions missing from truncated traces cannot confirm it).
  size_t max_stages = 0;
  for (const auto& t : traces) max_stages = std::max(max_stages, t.stage_records.size());
  for (size_t pos = 0; pos < max_stages; ++pos) {
    size_t identity_count = 0;
    size_t present_count = 0;
    for (const auto& t : traces) {
      if (pos >= t.stage_records.size()) continue;
      const auto& s = t.stage_records[pos];
      if (s.status != StageStatus::OK) continue;
      ++present_count;
      if (s.input == s.output) ++identity_count;
    }
    const bool fires = cfg.identity_rule == IdentityRule::All
                           ? (present_count == traces.size() &&
                              identity_count == traces.size())
                           : identity_count > 0;
    if (fires) {
      v.violated_rules.insert(Rule::R3_IDENTITY_STAGE);
      break;
    }
  }

  // R4: all final outputs equal
  bool all_equal = true;
  for (size_t i = 1; i < traces.size(); ++i)
    if (traces[i].final_output != traces[0].final_output) {
      all_equal = false;
      break;
    }
  if (all_equal) v.violated_rules.insert(Rule::R4_CONSTANT_OUTPUT);

  v.accepted = v.violated_rules.empty();
  return v;
}

UnitTestSet emit_unit_tests(const SyntheticCandidate& candidate,
                            const std::vector<ExecutionTrace>& traces,
                            const FilterConfig& cfg) {
  ValidityVerdict v = check_validity(traces, traces.size(), cfg);
  const std::string cid = traces.empty() ? "" : traces.front().candidate_id;
  if (!v.accepted) throw NotAcceptedError(cid);

  UnitTestSet tests;
  tests.candidate_id = cid;
  for (const auto& t : traces) {
    const Json& input = t.stage_records.front().input;
    tests.assertions.push_back("assert solve(" + py_literal(input) +
                               ") == " + py_literal(t.final_output));
  }
  (void)candidate;
  return tests;
}

}  // namespace codesynth
