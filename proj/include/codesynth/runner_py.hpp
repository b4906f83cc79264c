#pragma once

namespace codesynth {

// Source text of the child-side runner program (see src/runner_py.cpp).
extern const char* kRunnerProgram;

}  // namespace codesynth
