#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "rattle/params.hpp"

namespace rattle {

// One switching event. The record for n also stands for -n.
struct SwitchRecord {
    long n = 0;
    double t = 0.0;
    double q = 0.0;     // t - a n^2
    double grad = 0.0;  // u_{n+1}(t) - u_n(t)
};

struct SwitchHistory {
    Params params;
    double a = 0.0;
    std::vector<SwitchRecord> records;  // in order of switching time
    std::vector<double> t_switch;       // indexed by n >= 0, NaN while unswitched
    // Every switching before `complete_to` is recorded.
    double complete_to = 0.0;
    std::vector<std::string> notes;

    bool switched(long n) const;
    double time_of(long n) const;  // NaN when unswitched
    // Largest m such that 0..m have all switched.
    long frontier() const;
    long max_switched() const;
    void add(long n, double t);
};

// Initial history: node 0 switched at t = 0.
SwitchHistory initial_history(const Params& p, double a);

// u_n(t) from the Green representation using the switches in hist with t_k < t.
double eval_u(long n, double t, const SwitchHistory& hist);
// u_{n+1}(t) - u_n(t).
double eval_grad_u(long n, double t, const SwitchHistory& hist);
// du/dt and d2u/dt2 at (n, t) from the differentiated representation.
struct UDerivs {
    double u = 0.0, udot = 0.0, uddot = 0.0;
};
UDerivs eval_u_derivs(long n, double t, const SwitchHistory& hist);

struct SimOptions {
    double root_tol = 1e-10;      // on |u|
    double time_rel_tol = 1e-11;  // on the root bracket, relative to t
    double simultaneity = 1e-9;
    double t_max = std::numeric_limits<double>::infinity();
};

// Event-driven simulation until node n_max has switched, or until opts.t_max.
// Throws ConvergenceError when t_max is reached with h2 = 0 and node n_max unswitched.
SwitchHistory simulate(const Params& p, double a, long n_max, const SimOptions& opts = {});

struct OdeOptions {
    long radius = 40;
    double t_end = 0.0;
    double dt = 1e-3;
    // false keeps every relay at h1 forever.
    bool relays = true;
    // Stop once this many nodes n >= 1 have switched (0 = run to t_end).
    long stop_after = 0;
};

struct OdeResult {
    SwitchHistory hist;
    double max_asymmetry = 0.0;        // max |u_n - u_{-n}| over steps
    double max_boundary_u = -std::numeric_limits<double>::infinity();
    double max_free_deviation = 0.0;   // relays off: max |u_n - (-cn^2 + (h1-2c)t)|
    long steps = 0;
};

// RK4 on n in [-radius, radius] with far-field ghost nodes and event location by
// bisection on the cubic Hermite interpolant of each step.
OdeResult ode_oracle(const Params& p, double a, const OdeOptions& opts);

struct NoSwitchReport {
    long n = 0;
    double max_v = 0.0, argmax_t = 0.0;
    double v_at_start = 0.0;  // v_n(t_{n-1})
    double v_at_end = 0.0;    // v_n(t_n)
    // Over [t_{n-1}, t_{n-1} + theta0 sqrt(n-1)] and the rest of [t_{n-1}, t_n].
    double max_vdot_phase1 = 0.0;
    double min_vddot_phase2 = 0.0;
};

NoSwitchReport no_switch_diagnostic(long n, const SwitchHistory& hist, int samples, double theta0);

// Columns n, t_n, q_n, q_n/sqrt(n), grad, grad+0.75*h1.
void write_history_csv(std::ostream& os, const SwitchHistory& hist);

}  // namespace rattle
