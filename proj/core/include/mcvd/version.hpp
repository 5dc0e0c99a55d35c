#pragma once

namespace mcvd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mcvd
