#pragma once

namespace ddwave {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ddwave
