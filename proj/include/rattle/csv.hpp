#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rattle {

// Shortest-safe round trip: 17 significant digits, '.' decimal point.
std::string fmt_num(double v);

// RFC 4180 writer: CRLF line ends, fields quoted when they contain a comma,
// quote, CR or LF.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& os_;
};

}  // namespace rattle
