#pragma once

namespace iab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace iab
