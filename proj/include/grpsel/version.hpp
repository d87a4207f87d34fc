#pragma once

namespace grpsel {

inline constexpr const char* version = "0.1.0";

}  // namespace grpsel
