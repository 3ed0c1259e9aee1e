#pragma once

namespace mtqa {

inline constexpr const char* kToolName = "mtqa";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace mtqa
