#include "rattle/rate.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "rattle/errors.hpp"
#include "rattle/kernels.hpp"
#include "rattle/parallel.hpp"

namespace rattle {

namespace {

double integral(ProfileId id, double a, double tol) {
    return integral_I(id, a, IntegralForm::substituted, tol).value;
}

// The F and G integrands peak like sqrt(a) and the quadrature error estimate
// scales with them.
double scaled_tol(double a, double tol) { return tol * (1.0 + a); }

template <class Fn>
RateSolution solve_root(const Params& p, double tol, Fn&& phi) {
    validate(p);
    if (!(tol > 0.0)) throw DomainError("solve_a: tol must be positive");
    // phi is positive for small a and negative for large a.
    double lo = 1e-4, hi = 1e4;
    double flo = phi(lo), fhi = phi(hi);
    for (int i = 0; i < 40 && flo <= 0.0; ++i) flo = phi(lo *= 1e-2);
    for (int i = 0; i < 40 && fhi >= 0.0; ++i) fhi = phi(hi *= 1e2);
    if (!(flo > 0.0 && fhi < 0.0)) {
        std::ostringstream os;
        os << "solve_a: no bracket for h1 = " << p.h1 << ", c = " << p.c;
        throw ConvergenceError(os.str());
    }
    std::uintmax_t iters = 200;
    auto stop = [](double x, double y) { return std::abs(x - y) <= 2e-15 * std::max(std::abs(x), std::abs(y)); };
    auto r = boost::math::tools::toms748_solve(phi, lo, hi, flo, fhi, stop, iters);
    double a = 0.5 * (r.first + r.second);
    RateSolution s;
    s.a = a;
    s.iterations = static_cast<int>(iters);
    s.residual_f = rate_residual(RateEquation::f, p, a);
    s.residual_g = rate_residual(RateEquation::g, p, a);
    s.residual_h = rate_residual(RateEquation::h, p, a);
    return s;
}

}  // namespace

double rate_residual(RateEquation eq, const Params& p, double a) {
    switch (eq) {
        case RateEquation::f: return -p.c + (p.h1 - 2.0 * p.c) * a - p.h1 * integral(ProfileId::F, a, scaled_tol(a, 1e-14));
        case RateEquation::g: return -2.0 * p.c - p.h1 * integral(ProfileId::G, a, scaled_tol(a, 1e-14));
        case RateEquation::h: return (p.h1 - 2.0 * p.c) - p.h1 * integral(ProfileId::H, a, 1e-14);
    }
    throw DomainError("rate_residual: unknown equation");
}

RateSolution solve_a(const Params& p, double tol) {
    const double target = (p.h1 - 2.0 * p.c) / p.h1;
    const double qtol = std::min(1e-14, 0.1 * tol);
    RateSolution s = solve_root(p, tol, [&](double a) { return integral(ProfileId::H, a, qtol) - target; });
    if (!(std::abs(s.residual_h) / p.h1 <= tol)) {
        std::ostringstream os;
        os << "solve_a: residual " << s.residual_h / p.h1 << " above tol " << tol;
        throw ConvergenceError(os.str());
    }
    return s;
}

RateSolution solve_a_from_f(const Params& p, double tol) {
    const double qtol = std::min(1e-14, 0.1 * tol);
    // Negated so that, like I_H - target, it is positive for small a.
    return solve_root(p, tol, [&](double a) {
        return p.c - (p.h1 - 2.0 * p.c) * a + p.h1 * integral(ProfileId::F, a, scaled_tol(a, qtol));
    });
}

std::vector<RatePoint> a_sweep(double c, const std::vector<double>& h1_list, double tol, int threads) {
    for (double h1 : h1_list) validate(Params{c, h1, 0.0, 1.0});
    std::vector<RatePoint> out(h1_list.size());
    parallel_for(h1_list.size(), threads, [&](std::size_t i) {
        out[i].h1 = h1_list[i];
        out[i].sol = solve_a(Params{c, h1_list[i], 0.0, 1.0}, tol);
    });
    return out;
}

}  // namespace rattle
