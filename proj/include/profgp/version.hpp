#pragma once

namespace profgp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace profgp
