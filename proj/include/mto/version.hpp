#pragma once

namespace mto {
inline constexpr const char* kVersion = "0.1.0";
}
