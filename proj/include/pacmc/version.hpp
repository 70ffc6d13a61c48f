#pragma once

namespace pacmc {

inline constexpr const char* kToolName = "pacmc";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace pacmc
