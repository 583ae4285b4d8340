#pragma once

namespace reswvl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace reswvl
