#pragma once

namespace loadmix {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace loadmix
