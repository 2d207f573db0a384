#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rattle/errors.hpp"
#include "rattle/kernels.hpp"

namespace rattle {

// Adaptive Gauss-Kronrod (G15/K31) on [lo, hi] to an absolute tolerance.
// Boost terminates on a relative criterion and its estimate degrades once the
// relative target approaches rounding level, so the target is tightened a decade
// at a time and the smallest error estimate wins.
template <class Fn>
Integral gk_integrate(Fn&& fn, double lo, double hi, double tol, unsigned max_depth = 16) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    Integral best{0.0, std::numeric_limits<double>::infinity()};
    for (double rel = 1e-9; rel >= 1e-15; rel *= 0.1) {
        double err = 0.0;
        double v = GK::integrate(fn, lo, hi, max_depth, rel, &err);
        if (std::isfinite(v) && err < best.error) best = {v, err};
        if (best.error <= tol) return best;
    }
    std::ostringstream os;
    os << "adaptive quadrature on [" << lo << ", " << hi << "] stalled at error " << best.error
       << " > tol " << tol;
    throw ConvergenceError(os.str());
}

}  // namespace rattle
