#pragma once

namespace cop2l {

inline constexpr const char* kEngineVersion = "0.1.0";

}  // namespace cop2l
