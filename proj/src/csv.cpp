#include "rattle/csv.hpp"

#include <cmath>
#include <cstdio>

namespace rattle {

std::string fmt_num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os_ << ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\r\n") == std::string::npos) {
            os_ << f;
            continue;
        }
        os_ << '"';
        for (char ch : f) {
            if (ch == '"') os_ << '"';
            os_ << ch;
        }
        os_ << '"';
    }
    os_ << "\r\n";
}

}  // namespace rattle
