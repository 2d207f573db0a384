#include "rattle/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "rattle/csv.hpp"
#include "rattle/errors.hpp"
#include "rattle/green.hpp"

namespace rattle {

double ls_slope(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw PreconditionError("ls_slope: need two or more paired points");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx == 0.0) throw PreconditionError("ls_slope: xs are all equal");
    return sxy / sxx;
}

QnSeries extract_qn(const SwitchHistory& hist, double a, long lo, long hi) {
    if (hist.t_switch.empty()) throw PreconditionError("extract_qn: empty history");
    QnSeries s;
    s.a = a;
    const long f = hist.frontier();
    for (long n = 0; n <= f; ++n) {
        const double q = hist.time_of(n) - a * static_cast<double>(n) * static_cast<double>(n);
        s.entries.push_back({n, q, n == 0 ? 0.0 : q / std::sqrt(static_cast<double>(n))});
    }
    s.window_lo = std::max(1L, lo);
    s.window_hi = hi < 0 ? f : std::min(hi, f);
    for (long n = s.window_lo; n <= s.window_hi; ++n)
        s.fitted_E = std::max(s.fitted_E, std::abs(s.entries[n].q_over_sqrt_n));
    return s;
}

GradAsymptotics grad_asymptotics(const SwitchHistory& hist, long lo, long hi, long bound_from) {
    GradAsymptotics g;
    const double h1 = hist.params.h1;
    const long f = hist.frontier();
    if (hi < 0 || hi > f) hi = f;
    std::vector<double> grad(f + 1, std::numeric_limits<double>::quiet_NaN());
    for (const auto& r : hist.records)
        if (r.n <= f) grad[r.n] = r.grad;
    std::vector<double> lx, ly;
    for (long n = std::max(1L, lo); n <= hi; ++n) {
        const double res = (grad[n] + 0.75 * h1) * std::sqrt(static_cast<double>(n));
        g.n.push_back(n);
        g.residual.push_back(res);
        g.A_fit = std::max(g.A_fit, std::abs(res));
        if (res != 0.0) {
            lx.push_back(std::log(static_cast<double>(n)));
            ly.push_back(std::log(std::abs(res)));
        }
    }
    if (lx.size() >= 2) g.log_slope = ls_slope(lx, ly);
    g.max_grad = -std::numeric_limits<double>::infinity();
    for (long n = std::max(0L, bound_from); n <= hi; ++n) {
        g.max_grad = std::max(g.max_grad, grad[n]);
        if (grad[n] > -0.375 * h1) g.bound_holds = false;
    }
    return g;
}

double compute_Cn(long n, double a, const Params& p) {
    if (n < 1) throw PreconditionError("compute_Cn: n must be >= 1");
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    double s = 0.0;
    for (long k = 0; k < n; ++k) {
        const double tau = a * (nn - static_cast<double>(k) * static_cast<double>(k));
        s += eval_green(n - k, tau).y;
        if (k > 0) s += eval_green(n + k, tau).y;
    }
    return -p.c * nn + (p.h1 - 2.0 * p.c) * a * nn - p.h1 * s;
}

namespace {

double nsq(long m, long k) { return static_cast<double>(m) * m - static_cast<double>(k) * k; }

// J_{m,k} from precomputed alpha pairs; q_{-k} = q_k.
void fill_terms(const Params& p, double a, long m, double q_m, std::span<const double> q_prev,
                std::span<const double> alpha_p, std::span<const double> alpha_m, FixedPointTerms& ft) {
    ft.m = m;
    ft.q = q_m;
    ft.J.assign(m, 0.0);
    double sumJ = 0.0, sumJq = 0.0;
    for (long k = 0; k < m; ++k) {
        const double tau = a * nsq(m, k);
        const double d = q_m - q_prev[k];
        double beta_p = 0.0, beta_m = 0.0;
        if (d != 0.0) {
            beta_p = green_y_quotient(m - k, tau, d) - alpha_p[k];
            if (k > 0) beta_m = green_y_quotient(m + k, tau, d) - alpha_m[k];
        }
        const double J = alpha_p[k] + beta_p + (k > 0 ? alpha_m[k] + beta_m : 0.0);
        ft.J[k] = J;
        sumJ += J;
        sumJq += J * q_prev[k];
    }
    ft.D = p.h1 - 2.0 * p.c - p.h1 * sumJ;
    ft.residual = ft.C + ft.D * q_m + p.h1 * sumJq;
}

void alphas(double a, long m, std::vector<double>& ap, std::vector<double>& am) {
    ap.assign(m, 0.0);
    am.assign(m, 0.0);
    for (long k = 0; k < m; ++k) {
        const double tau = a * nsq(m, k);
        ap[k] = eval_ydot_bessel(m - k, tau);
        if (k > 0) am[k] = eval_ydot_bessel(m + k, tau);
    }
}

}  // namespace

FixedPointTerms fixed_point_terms(const Params& p, double a, long m, double q_m, std::span<const double> q_prev,
                                  double C) {
    if (m < 1) throw PreconditionError("fixed_point_terms: m must be >= 1");
    if (static_cast<long>(q_prev.size()) < m) throw PreconditionError("fixed_point_terms: need q_0..q_{m-1}");
    std::vector<double> ap, am;
    alphas(a, m, ap, am);
    FixedPointTerms ft;
    ft.C = std::isnan(C) ? compute_Cn(m, a, p) : C;
    fill_terms(p, a, m, q_m, q_prev, ap, am, ft);
    return ft;
}

CandidateResult candidate_step(const Params& p, double a, const CandidateState& state, double E) {
    validate(p);
    const long m = state.n + 1;
    if (static_cast<long>(state.q.size()) < m) throw PreconditionError("candidate_step: need q_0..q_n");
    if (!(E > 0.0)) throw PreconditionError("candidate_step: E must be positive");
    const std::span<const double> qp(state.q.data(), m);
    std::vector<double> ap, am;
    alphas(a, m, ap, am);
    const double C = compute_Cn(m, a, p);

    CandidateResult res;
    res.min_J = std::numeric_limits<double>::infinity();
    res.min_D = std::numeric_limits<double>::infinity();
    FixedPointTerms ft;
    ft.C = C;
    // q - F(q) = residual / D
    auto g = [&](double q) {
        fill_terms(p, a, m, q, qp, ap, am, ft);
        for (double j : ft.J) res.min_J = std::min(res.min_J, j);
        res.min_D = std::min(res.min_D, ft.D);
        return ft.residual / ft.D;
    };
    double lo = -E * std::sqrt(static_cast<double>(m)), hi = -lo;
    double glo = g(lo), ghi = g(hi);
    if (glo == 0.0) hi = lo;
    else if (ghi == 0.0) lo = hi;
    else if ((glo > 0) == (ghi > 0))
        throw ConvergenceError("candidate_step: q - F(q) has no sign change on [-E sqrt(n+1), E sqrt(n+1)] at n+1 = " +
                               std::to_string(m));
    while (hi - lo > 1e-13 * (1.0 + std::abs(lo) + std::abs(hi)) && res.iterations < 200) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        ++res.iterations;
        if (gm == 0.0) {
            lo = hi = mid;
            break;
        }
        if ((gm > 0) == (glo > 0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    res.q_next = 0.5 * (lo + hi);
    g(res.q_next);
    res.terms = ft;
    return res;
}

RescaledMap rescaled_map(const Params& p, double a, long n, std::span<const double> q, double kappa) {
    if (n < 1) throw PreconditionError("rescaled_map: n must be >= 1");
    if (static_cast<long>(q.size()) < n + 2) throw PreconditionError("rescaled_map: need q_0..q_{n+1}");
    const FixedPointTerms tn = fixed_point_terms(p, a, n, q[n], q.first(n));
    const FixedPointTerms tn1 = fixed_point_terms(p, a, n + 1, q[n + 1], q.first(n + 1));
    const double r = 1.0 + kappa / static_cast<double>(n);
    RescaledMap out;
    out.item2 = std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (long k = 0; k < n; ++k) {
        const double w = tn.J[k] - r * tn1.J[k];
        out.item2 = std::min(out.item2, w);
        acc += w * q[k];
    }
    out.item3 = tn.D - p.h1 * r * tn1.J[n];
    const double num = -((tn1.C - tn.C) + kappa / static_cast<double>(n) * tn1.C) + out.item3 * q[n] + p.h1 * acc;
    out.value = num / (r * tn1.D);
    return out;
}

PatternStats pattern_stats(const SwitchHistory& hist, long j) {
    if (j < 0) throw PreconditionError("pattern_stats: j must be >= 0");
    PatternStats s;
    const double T = hist.complete_to;
    const double floor_u = -0.05 * hist.params.h1;
    for (long n = 0; n <= j; ++n) {
        if (hist.switched(n) && hist.time_of(n) <= T) {
            ++s.N1;
            continue;
        }
        const UDerivs d = eval_u_derivs(n, T, hist);
        if (d.u <= floor_u && d.udot < 0.0) {
            ++s.N2;
            s.never.push_back(n);
        } else {
            ++s.undecided;
        }
    }
    s.ratio = s.N1 > 0 ? static_cast<double>(s.N2) / static_cast<double>(s.N1) : 0.0;
    return s;
}

void write_qn_csv(std::ostream& os, const QnSeries& s) {
    CsvWriter w(os);
    w.row({"n", "q_n", "q_n/sqrt(n)", "in_window"});
    for (const auto& e : s.entries)
        w.row({std::to_string(e.n), fmt_num(e.q), fmt_num(e.q_over_sqrt_n),
               e.n >= s.window_lo && e.n <= s.window_hi ? "1" : "0"});
}

void write_grad_csv(std::ostream& os, const SwitchHistory& hist, const GradAsymptotics& g) {
    CsvWriter w(os);
    w.row({"n", "grad", "residual"});
    for (std::size_t i = 0; i < g.n.size(); ++i) {
        double grad = std::numeric_limits<double>::quiet_NaN();
        for (const auto& r : hist.records)
            if (r.n == g.n[i]) grad = r.grad;
        w.row({std::to_string(g.n[i]), fmt_num(grad), fmt_num(g.residual[i])});
    }
}

}  // namespace rattle
