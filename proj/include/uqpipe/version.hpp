#pragma once

namespace uqpipe {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace uqpipe
