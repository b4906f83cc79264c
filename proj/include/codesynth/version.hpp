#pragma once

namespace codesynth {

inline constexpr const char* kToolName = "codesynth";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace codesynth
