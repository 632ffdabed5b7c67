#pragma once

#include <charconv>
#include <cstdio>
#include <ostream>
#include <string>

namespace habit {

/// Shortest round-trip decimal form of a double (locale-independent), so CSV
/// artifacts are byte-stable and parse back to the identical bits.
inline std::string fmt_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::ostream& put_double(std::ostream& os, double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return os.write(buf, ptr - buf);
}

} // namespace habit
