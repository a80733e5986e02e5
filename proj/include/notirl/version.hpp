#pragma once

#include <string_view>

namespace notirl {

inline constexpr std::string_view kVersion = "0.1.0";

// Bumped whenever the on-disk dataset or checkpoint layout changes.
inline constexpr int kFormatVersion = 1;

}  // namespace notirl
