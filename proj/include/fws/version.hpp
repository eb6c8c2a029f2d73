#pragma once

namespace fws {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace fws
