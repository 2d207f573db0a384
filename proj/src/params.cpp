#include "rattle/params.hpp"

#include <cmath>
#include <sstream>

#include "rattle/errors.hpp"

namespace rattle {

void validate(const Params& p) {
    std::ostringstream os;
    if (!(p.c > 0.0) || !std::isfinite(p.c)) os << "c must be positive; ";
    if (!(p.h1 > 2.0 * p.c) || !std::isfinite(p.h1)) os << "h1 > 2c violated (h1 = " << p.h1 << ", c = " << p.c << "); ";
    if (!(p.h2 >= 0.0) || !std::isfinite(p.h2)) os << "h2 must be nonnegative; ";
    if (!(p.tau0 > 0.0) || !std::isfinite(p.tau0)) os << "tau0 must be positive; ";
    std::string msg = os.str();
    if (!msg.empty()) throw PreconditionError(msg.substr(0, msg.size() - 2));
}

}  // namespace rattle
