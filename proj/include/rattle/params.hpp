#pragma once

namespace rattle {

struct Params {
    double c = 0.5;
    double h1 = 2.0;
    double h2 = 0.0;
    double tau0 = 1.0;
};

// Throws PreconditionError unless h1 > 2c > 0, h2 >= 0 and tau0 > 0.
void validate(const Params& p);

}  // namespace rattle
