#pragma once

namespace cycledistill {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cycledistill
