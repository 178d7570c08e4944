#pragma once

// Text output helpers: 17 significant digits everywhere so emitted tables
// round-trip exactly.

#include <cstdio>
#include <ostream>
#include <string>

namespace misspec {

inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_kv(std::ostream& os, const std::string& key, double value) {
    os << key << " = " << fmt_g17(value) << "\n";
}

inline void write_kv(std::ostream& os, const std::string& key, const std::string& value) {
    os << key << " = " << value << "\n";
}

} // namespace misspec
