#include "rattle/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/math/tools/toms748_solve.hpp>

#include "rattle/csv.hpp"
#include "rattle/errors.hpp"
#include "rattle/green.hpp"

namespace rattle {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double drive_drop(const Params& p) { return p.h1 + p.h2; }

// sum over switched k with t_k < t of y_{n-k}(t - t_k), with grad the same sum of
// y_{n+1-k} - y_{n-k}.
void green_sums(long n, double t, const SwitchHistory& h, double* sy, double* sg) {
    double acc_y = 0.0, acc_g = 0.0;
    long ms[2];
    double y[2], g[2];
    for (std::size_t m = 0; m < h.t_switch.size(); ++m) {
        const double tm = h.t_switch[m];
        if (!(tm < t)) continue;
        const long mm = static_cast<long>(m);
        ms[0] = n - mm;
        ms[1] = n + mm;
        const std::size_t cnt = mm == 0 ? 1 : 2;
        if (sg) {
            green_y_batch(t - tm, std::span<const long>(ms, cnt), std::span<double>(y, cnt),
                          std::span<double>(g, cnt));
            acc_g += g[0] + (cnt == 2 ? g[1] : 0.0);
        } else {
            green_y_batch(t - tm, std::span<const long>(ms, cnt), std::span<double>(y, cnt));
        }
        acc_y += y[0] + (cnt == 2 ? y[1] : 0.0);
    }
    if (sy) *sy = acc_y;
    if (sg) *sg = acc_g;
}

}  // namespace

bool SwitchHistory::switched(long n) const { return !std::isnan(time_of(n)); }

double SwitchHistory::time_of(long n) const {
    n = std::abs(n);
    if (n >= static_cast<long>(t_switch.size())) return kNaN;
    return t_switch[n];
}

long SwitchHistory::frontier() const {
    long m = -1;
    while (m + 1 < static_cast<long>(t_switch.size()) && !std::isnan(t_switch[m + 1])) ++m;
    return m;
}

long SwitchHistory::max_switched() const {
    for (long m = static_cast<long>(t_switch.size()) - 1; m >= 0; --m)
        if (!std::isnan(t_switch[m])) return m;
    return -1;
}

void SwitchHistory::add(long n, double t) {
    n = std::abs(n);
    if (n >= static_cast<long>(t_switch.size())) t_switch.resize(n + 1, kNaN);
    t_switch[n] = t;
    SwitchRecord r;
    r.n = n;
    r.t = t;
    r.q = t - a * static_cast<double>(n) * static_cast<double>(n);
    records.push_back(r);
}

SwitchHistory initial_history(const Params& p, double a) {
    validate(p);
    SwitchHistory h;
    h.params = p;
    h.a = a;
    h.add(0, 0.0);
    h.records[0].grad = -p.c;
    return h;
}

double eval_u(long n, double t, const SwitchHistory& hist) {
    const Params& p = hist.params;
    double sy = 0.0;
    green_sums(n, t, hist, &sy, nullptr);
    const double nd = static_cast<double>(n);
    return -p.c * nd * nd + (p.h1 - 2.0 * p.c) * t - drive_drop(p) * sy;
}

double eval_grad_u(long n, double t, const SwitchHistory& hist) {
    const Params& p = hist.params;
    double sg = 0.0;
    green_sums(n, t, hist, nullptr, &sg);
    return -p.c * (2.0 * static_cast<double>(n) + 1.0) - drive_drop(p) * sg;
}

UDerivs eval_u_derivs(long n, double t, const SwitchHistory& hist) {
    const Params& p = hist.params;
    double sy = 0.0, syd = 0.0, sydd = 0.0;
    GreenEval e[2];
    long ms[2];
    for (std::size_t m = 0; m < hist.t_switch.size(); ++m) {
        const double tm = hist.t_switch[m];
        if (!(tm < t)) continue;
        const long mm = static_cast<long>(m);
        ms[0] = n - mm;
        ms[1] = n + mm;
        const std::size_t cnt = mm == 0 ? 1 : 2;
        green_eval_batch(t - tm, std::span<const long>(ms, cnt), std::span<GreenEval>(e, cnt));
        for (std::size_t i = 0; i < cnt; ++i) {
            sy += e[i].y;
            syd += e[i].ydot;
            sydd += e[i].yddot;
        }
    }
    const double nd = static_cast<double>(n);
    UDerivs d;
    d.u = -p.c * nd * nd + (p.h1 - 2.0 * p.c) * t - drive_drop(p) * sy;
    d.udot = (p.h1 - 2.0 * p.c) - drive_drop(p) * syd;
    d.uddot = -drive_drop(p) * sydd;
    return d;
}

// ---- event-driven simulation ----

namespace {

struct ScanState {
    double last_neg = 0.0;  // u_n < 0 is known up to this time
};

struct Root {
    bool found = false;
    double t = 0.0;
};

Root refine(long n, double lo, double hi, double ulo, double uhi, const SwitchHistory& h, const SimOptions& o) {
    double last_u = uhi, last_t = hi;
    auto fn = [&](double t) {
        last_t = t;
        last_u = eval_u(n, t, h);
        return last_u;
    };
    auto stop = [&](double x, double y) {
        return std::abs(last_u) <= o.root_tol || std::abs(y - x) <= o.time_rel_tol * std::max(std::abs(x), std::abs(y));
    };
    std::uintmax_t iters = 200;
    auto r = boost::math::tools::toms748_solve(fn, lo, hi, ulo, uhi, stop, iters);
    if (iters >= 200) {
        std::ostringstream os;
        os << "simulate: root refinement for node " << n << " did not converge on [" << lo << ", " << hi << "]";
        throw ConvergenceError(os.str());
    }
    Root out;
    out.found = true;
    out.t = std::abs(last_u) <= o.root_tol && last_t >= r.first && last_t <= r.second ? last_t
                                                                                         : 0.5 * (r.first + r.second);
    return out;
}

Root earliest_root(long n, double tau, double cap, ScanState& st, const SwitchHistory& h, const SimOptions& o) {
    const Params& p = h.params;
    const double nd = static_cast<double>(n);
    const double lower = p.c * nd * nd / (p.h1 - 2.0 * p.c);
    const double step = std::max(0.25, 0.02 * h.a * (2.0 * nd - 1.0));
    double t0 = std::max({tau, lower, st.last_neg});
    if (t0 >= cap) return {};
    double u0 = eval_u(n, t0, h);
    if (u0 >= 0.0) return {true, t0};
    st.last_neg = t0;
    while (t0 < cap) {
        const double t1 = std::min(t0 + step, cap);
        const double u1 = eval_u(n, t1, h);
        if (u1 >= 0.0) return refine(n, t0, t1, u0, u1, h, o);
        t0 = t1;
        u0 = u1;
        st.last_neg = t0;
    }
    return {};
}

}  // namespace

SwitchHistory simulate(const Params& p, double a, long n_max, const SimOptions& opts) {
    validate(p);
    if (n_max < 1) throw PreconditionError("simulate: n_max must be at least 1");
    if (!(a > 0.0)) throw PreconditionError("simulate: a must be positive");
    SwitchHistory h = initial_history(p, a);
    std::map<long, ScanState> scans;
    double tau = 0.0;
    while (!h.switched(n_max)) {
        const long top = h.max_switched() + 2;
        const long front = h.frontier() + 1;
        double best = opts.t_max;
        std::vector<std::pair<long, double>> winners;
        for (long n = 1; n <= top; ++n) {
            if (h.switched(n)) continue;
            // Roots later than best + simultaneity cannot win.
            const double cap = std::isfinite(best) ? best + opts.simultaneity : best;
            Root r = earliest_root(n, tau, cap, scans[n], h, opts);
            if (!r.found) continue;
            if (r.t < best - opts.simultaneity) {
                best = r.t;
                winners.assign(1, {n, r.t});
            } else if (std::abs(r.t - best) <= opts.simultaneity) {
                winners.emplace_back(n, r.t);
                best = std::min(best, r.t);
            }
        }
        if (winners.empty()) {
            if (p.h2 > 0.0) {
                h.complete_to = opts.t_max;
                break;
            }
            std::ostringstream os;
            os << "simulate: horizon " << opts.t_max << " reached before node " << n_max << " switched";
            throw ConvergenceError(os.str());
        }
        std::sort(winners.begin(), winners.end(), [](auto& x, auto& y) { return x.second < y.second || (x.second == y.second && x.first < y.first); });
        for (auto& [n, t] : winners) {
            if (n != front) {
                std::ostringstream os;
                os << "non-frontier switch: node " << n << " at t = " << fmt_num(t) << " with frontier " << front;
                h.notes.push_back(os.str());
            }
            h.add(n, t);
            scans.erase(n);
        }
        for (auto& [n, t] : winners) {
            for (auto& r : h.records)
                if (r.n == n) r.grad = eval_grad_u(n, t, h);
        }
        tau = best;
        h.complete_to = tau;
    }
    return h;
}

// ---- ODE oracle ----

OdeResult ode_oracle(const Params& p, double a, const OdeOptions& o) {
    validate(p);
    if (o.radius < 2) throw PreconditionError("ode_oracle: radius must be at least 2");
    if (!(o.dt > 0.0) || o.dt > 0.5) throw PreconditionError("ode_oracle: dt must lie in (0, 0.5]");
    if (!(o.t_end > 0.0)) throw PreconditionError("ode_oracle: t_end must be positive");
    const long R = o.radius;
    const std::size_t W = static_cast<std::size_t>(2 * R + 1);
    const double drop = drive_drop(p);
    OdeResult res;
    res.hist = initial_history(p, a);
    SwitchHistory& h = res.hist;

    std::vector<double> u(W), on(W, 1.0);
    for (long n = -R; n <= R; ++n) u[n + R] = -p.c * static_cast<double>(n) * static_cast<double>(n);
    if (o.relays) on[R] = 0.0;

    // RK4 stages revisit the same times, so the last few ghost values are kept.
    // Entries are dropped whenever the switch set changes.
    std::vector<std::pair<double, double>> ghost_memo;
    auto ghost = [&](double t) {
        for (auto& [tt, gv] : ghost_memo)
            if (tt == t) return gv;
        const double m = static_cast<double>(R + 1);
        double v = -p.c * m * m + (p.h1 - 2.0 * p.c) * t;
        if (o.relays) {
            double sy = 0.0;
            green_sums(R + 1, t, h, &sy, nullptr);
            v -= drop * sy;
        }
        if (ghost_memo.size() >= 4) ghost_memo.erase(ghost_memo.begin());
        ghost_memo.emplace_back(t, v);
        return v;
    };
    auto rhs = [&](double t, const std::vector<double>& v, std::vector<double>& out) {
        const double g = ghost(t);
        for (std::size_t i = 0; i < W; ++i) {
            const double l = i == 0 ? g : v[i - 1];
            const double r = i + 1 == W ? g : v[i + 1];
            out[i] = (l + r) - 2.0 * v[i] + (on[i] > 0.0 ? p.h1 : -p.h2);
        }
    };
    std::vector<double> k1(W), k2(W), k3(W), k4(W), tmp(W), next(W), fnext(W);
    auto rk4 = [&](double t, double dt, const std::vector<double>& f0, std::vector<double>& out) {
        for (std::size_t i = 0; i < W; ++i) tmp[i] = u[i] + 0.5 * dt * f0[i];
        rhs(t + 0.5 * dt, tmp, k2);
        for (std::size_t i = 0; i < W; ++i) tmp[i] = u[i] + 0.5 * dt * k2[i];
        rhs(t + 0.5 * dt, tmp, k3);
        for (std::size_t i = 0; i < W; ++i) tmp[i] = u[i] + dt * k3[i];
        rhs(t + dt, tmp, k4);
        for (std::size_t i = 0; i < W; ++i) out[i] = u[i] + dt / 6.0 * (f0[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    };

    double t = 0.0;
    long switched_count = 0;
    const double bound = -p.c * static_cast<double>(R) * static_cast<double>(R) / 2.0;
    while (t < o.t_end) {
        const double dt = std::min(o.dt, o.t_end - t);
        rhs(t, u, k1);
        rk4(t, dt, k1, next);
        double t_next = t + dt;
        // Earliest crossing inside the step, from the Hermite interpolant.
        double t_cross = std::numeric_limits<double>::infinity();
        std::vector<std::size_t> crossing;
        if (o.relays) {
            rhs(t_next, next, fnext);
            for (std::size_t i = 0; i < W; ++i) {
                if (on[i] == 0.0 || !(next[i] >= 0.0)) continue;
                const double y0 = u[i], y1 = next[i], d0 = k1[i] * dt, d1 = fnext[i] * dt;
                auto herm = [&](double s) {
                    const double s2 = s * s, s3 = s2 * s;
                    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * d1;
                };
                double lo = 0.0, hi = 1.0;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (herm(mid) >= 0.0 ? hi : lo) = mid;
                }
                const double tc = t + hi * dt;
                if (tc < t_cross - 1e-12) {
                    t_cross = tc;
                    crossing.assign(1, i);
                } else if (std::abs(tc - t_cross) <= 1e-12) {
                    crossing.push_back(i);
                }
            }
        }
        if (!crossing.empty()) {
            const double dtc = t_cross - t;
            rk4(t, dtc, k1, next);
            t_next = t_cross;
            for (std::size_t i : crossing) next[i] = std::max(next[i], 0.0);
        }
        u.swap(next);
        t = t_next;
        ++res.steps;
        for (long n = 1; n <= R; ++n)
            res.max_asymmetry = std::max(res.max_asymmetry, std::abs(u[R + n] - u[R - n]));
        for (std::size_t i = 0; i < W; ++i) {
            if (!std::isfinite(u[i])) throw ConvergenceError("ode_oracle: non-finite state (step too large)");
        }
        res.max_boundary_u = std::max({res.max_boundary_u, u[0], u[W - 1]});
        if (res.max_boundary_u > bound) {
            std::ostringstream os;
            os << "ode_oracle: boundary contamination, u at radius " << R << " reached " << res.max_boundary_u
               << " > " << bound << " at t = " << t;
            throw PreconditionError(os.str());
        }
        if (!o.relays) {
            for (long n = -R; n <= R; ++n) {
                const double ex = -p.c * static_cast<double>(n) * static_cast<double>(n) + (p.h1 - 2.0 * p.c) * t;
                res.max_free_deviation = std::max(res.max_free_deviation, std::abs(u[n + R] - ex));
            }
        }
        if (!crossing.empty()) {
            std::vector<long> nodes;
            for (std::size_t i : crossing) {
                on[i] = 0.0;
                const long n = std::abs(static_cast<long>(i) - R);
                if (std::find(nodes.begin(), nodes.end(), n) == nodes.end()) nodes.push_back(n);
            }
            // Mirror partners cross in the same step by symmetry.
            for (long n : nodes) {
                on[R + n] = 0.0;
                on[R - n] = 0.0;
                if (h.switched(n)) continue;
                h.add(n, t);
                h.records.back().grad = u[R + n + 1] - u[R + n];
                ++switched_count;
            }
            h.complete_to = t;
            ghost_memo.clear();
            if (o.stop_after > 0 && switched_count >= o.stop_after) break;
        }
    }
    h.complete_to = t;
    return res;
}

// ---- diagnostics ----

NoSwitchReport no_switch_diagnostic(long n, const SwitchHistory& hist, int samples, double theta0) {
    if (n < 1 || !hist.switched(n) || !hist.switched(n - 1))
        throw PreconditionError("no_switch_diagnostic: nodes n and n-1 must have switched");
    if (samples < 2) throw PreconditionError("no_switch_diagnostic: need at least 2 samples");
    const double t0 = hist.time_of(n - 1), t1 = hist.time_of(n);
    NoSwitchReport r;
    r.n = n;
    r.v_at_start = eval_u(n, t0, hist);
    r.v_at_end = eval_u(n, t1, hist);
    r.max_v = -std::numeric_limits<double>::infinity();
    auto cheb = [samples](double lo, double hi, int k) {
        const double x = std::cos((2.0 * k + 1.0) * std::numbers::pi / (2.0 * samples));
        return lo + 0.5 * (hi - lo) * (1.0 - x);
    };
    for (int k = 0; k < samples; ++k) {
        const double t = cheb(t0, t1, k);
        const double v = eval_u(n, t, hist);
        if (v > r.max_v) {
            r.max_v = v;
            r.argmax_t = t;
        }
    }
    const double split = std::min(t1, t0 + theta0 * std::sqrt(static_cast<double>(n - 1)));
    r.max_vdot_phase1 = -std::numeric_limits<double>::infinity();
    r.min_vddot_phase2 = std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
        if (split > t0) r.max_vdot_phase1 = std::max(r.max_vdot_phase1, eval_u_derivs(n, cheb(t0, split, k), hist).udot);
        if (t1 > split) r.min_vddot_phase2 = std::min(r.min_vddot_phase2, eval_u_derivs(n, cheb(split, t1, k), hist).uddot);
    }
    return r;
}

void write_history_csv(std::ostream& os, const SwitchHistory& hist) {
    CsvWriter w(os);
    w.row({"n", "t_n", "q_n", "q_n/sqrt(n)", "grad", "grad+0.75*h1"});
    for (const SwitchRecord& r : hist.records) {
        const double qs = r.n > 0 ? r.q / std::sqrt(static_cast<double>(r.n)) : 0.0;
        w.row({std::to_string(r.n), fmt_num(r.t), fmt_num(r.q), fmt_num(qs), fmt_num(r.grad),
               fmt_num(r.grad + 0.75 * hist.params.h1)});
    }
}

}  // namespace rattle
