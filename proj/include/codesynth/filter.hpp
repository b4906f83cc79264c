#pragma once

#include <set>
#include <string>
#include <vector>

#include "codesynth/compose.hpp"
#include "codesynth/sandbox.hpp"

namespace codesynth {

// Rejection rules applied to traced candidates:
//   R1 any stage raised or timed out
//   R2 any stage output the null value
//   R3 some stage position is the identity map (input equals output)
//   R4 all final outputs are equal across the input sets
enum class Rule {
  R1_RUNTIME_ERROR,
  R2_NONE_OUTPUT,
  R3_IDENTITY_STAGE,
  R4_CONSTANT_OUTPUT,
};

std::string to_string(Rule r);

// R3 can fire when a stage is identity on every input set (the default) or
// on any single one.
enum class IdentityRule { All, Any };

struct FilterConfig {
  IdentityRule identity_rule = IdentityRule::All;
};

struct ValidityVerdict {
  std::string candidate_id;
  bool accepted = false;
  std::set<Rule> violated_rules;
};

struct UnitTestSet {
  std::string candidate_id;
  std::vector<std::string> assertions;
};

// Evaluates all four rules (no short-circuiting) over the k traces of one
// candidate. Throws IncompleteTracesError when traces.size() != expected_k.
ValidityVerdict check_validity(const std::vector<ExecutionTrace>& traces,
                               size_t expected_k,
                               const FilterConfig& cfg = {});

// One assertion per trace: solve(<input>) == <final output>, with values
// rendered as source literals that round-trip exactly. The candidate must
// have been accepted.
UnitTestSet emit_unit_tests(const SyntheticCandidate& candidate,
                            const std::vector<ExecutionTrace>& traces,
                            const FilterConfig& cfg = {});

}  // namespace codesynth
