#pragma once

#include <vector>

#include "rattle/params.hpp"

namespace rattle {

struct RateSolution {
    double a = 0.0;
    // Left-hand sides of the three equivalent rate equations at a.
    double residual_f = 0.0, residual_g = 0.0, residual_h = 0.0;
    int iterations = 0;
};

enum class RateEquation { f, g, h };

double rate_residual(RateEquation eq, const Params& p, double a);

// Root of (h1 - 2c) - h1 I_H(a) with |I_H(a) - (h1 - 2c)/h1| <= tol.
RateSolution solve_a(const Params& p, double tol = 1e-12);
// Root of -c + (h1 - 2c) a - h1 I_F(a), found independently of solve_a.
RateSolution solve_a_from_f(const Params& p, double tol = 1e-12);

struct RatePoint {
    double h1 = 0.0;
    RateSolution sol;
};

// One solve per entry, in input order. threads <= 1 runs serially.
std::vector<RatePoint> a_sweep(double c, const std::vector<double>& h1_list, double tol = 1e-12,
                               int threads = 1);

}  // namespace rattle
