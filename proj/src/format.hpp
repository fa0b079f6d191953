#pragma once

#include <charconv>
#include <string>

namespace grn::detail {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v == 0.0 ? 0.0 : v);
    return std::string(buf, ptr);
}

} // namespace grn::detail
