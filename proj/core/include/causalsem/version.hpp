#pragma once

namespace causalsem {

inline constexpr const char* kVersion = "0.1.0";

// Schema version shared by all JSON artifacts (graphs, checkpoints, reports).
inline constexpr int kFormatVersion = 1;

}  // namespace causalsem
