#pragma once

namespace gcl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gcl
