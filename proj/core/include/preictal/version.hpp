#pragma once

namespace preictal {
inline constexpr const char* kVersion = "0.1.0";
}
