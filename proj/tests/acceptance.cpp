// Acceptance run: one PASS/FAIL line per criterion. Arguments select criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "rattle/admissibility.hpp"
#include "rattle/analysis.hpp"
#include "rattle/green.hpp"
#include "rattle/kernels.hpp"
#include "rattle/rate.hpp"
#include "rattle/sim.hpp"

using namespace rattle;

namespace {

const Params kP15{0.5, 1.5, 0.0, 1.0};
const Params kP20{0.5, 2.0, 0.0, 1.0};

std::string fmt(const char* f, double x) {
    char b[64];
    std::snprintf(b, sizeof b, f, x);
    return b;
}

struct Result {
    bool pass = true;
    std::string detail;
    void check(bool ok, const std::string& what) {
        pass &= ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

double rate20() {
    static const double a = solve_a(kP20).a;
    return a;
}

const ConstantsTable& table20() {
    static const ConstantsTable t = build_constants(kP20, rate20());
    return t;
}

// ---- criteria

Result c1() {
    Result r;
    for (const Params& p : {kP15, kP20}) {
        const auto t0 = std::chrono::steady_clock::now();
        const RateSolution s = solve_a(p);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const double ih = std::abs(I_H(s.a) - (p.h1 - 2 * p.c) / p.h1);
        const double rf = std::abs(rate_residual(RateEquation::f, p, s.a));
        const double rg = std::abs(rate_residual(RateEquation::g, p, s.a));
        const std::string tag = "h1=" + fmt("%g", p.h1);
        r.check(ih <= 1e-10, tag + " a=" + fmt("%.15g", s.a) + " |I_H-target|=" + fmt("%.2e", ih));
        r.check(rf <= 1e-8 && rg <= 1e-8, tag + " res_f=" + fmt("%.2e", rf) + " res_g=" + fmt("%.2e", rg));
        r.check(secs < 1.0, tag + " " + fmt("%.3fs", secs));
    }
    return r;
}

Result c2() {
    Result r;
    double eg = 0, ef = 0, eh = 0;
    for (int i = 0; i < 20; ++i) {
        const double a = 0.05 * std::pow(400.0, i / 19.0);
        const double IH = I_H(a);
        eg = std::max(eg, std::abs(I_G(a) - (IH - 1)));
        ef = std::max(ef, std::abs(I_F(a) - ((2 * a + 1) * IH - 1) / 2));
        const double orig = integral_I(ProfileId::H, a, IntegralForm::original, 1e-13).value;
        eh = std::max(eh, std::abs(orig - IH));
    }
    r.check(eg <= 1e-8, "max |I_G-(I_H-1)|=" + fmt("%.2e", eg));
    r.check(ef <= 1e-8, "max |I_F-((2a+1)I_H-1)/2|=" + fmt("%.2e", ef));
    r.check(eh <= 1e-10, "max |I_H original-substituted|=" + fmt("%.2e", eh));
    return r;
}

Result c3() {
    Result r;
    double fb = 0, ode = 0;
    bool mono = true;
    for (double t : {0.1, 1.0, 10.0, 100.0, 200.0}) {
        std::vector<GreenEval> g;
        for (long n = 0; n <= 52; ++n) g.push_back(eval_green(n, t));
        for (long n = 0; n <= 50; ++n) {
            fb = std::max(fb, std::abs(g[n].ydot - eval_ydot_bessel(n, t)));
            const double lap = (n == 0 ? g[1].y : g[n - 1].y) - 2 * g[n].y + g[n + 1].y;
            ode = std::max(ode, std::abs(g[n].ydot - lap - (n == 0 ? 1.0 : 0.0)));
            // the Bessel route is relatively accurate where ydot is tiny
            if (!(eval_ydot_bessel(n + 1, t) < eval_ydot_bessel(n, t))) mono = false;
        }
    }
    r.check(fb <= 1e-10, "max |ydot fourier-bessel|=" + fmt("%.2e", fb));
    r.check(ode <= 1e-8, "max lattice heat residual=" + fmt("%.2e", ode));
    r.check(mono, "ydot_{n+1} < ydot_n on the grid (Bessel values)");
    return r;
}

Result c4() {
    Result r;
    const GreenSups g = green_sup_constants(1.0);
    const std::pair<const char*, const SupEntry*> es[] = {{"A0", &g.A0}, {"A1", &g.A1},   {"A1~", &g.At1},
                                                          {"A2", &g.A2}, {"B0", &g.B0},   {"B1", &g.B1},
                                                          {"A2*", &g.A2s}, {"B2*", &g.B2s}};
    for (const auto& [name, e] : es)
        r.check(std::isfinite(e->value) && e->plateau_change <= 0.05,
                std::string(name) + "=" + fmt("%.5g", e->value) + " (change " + fmt("%.2e", e->plateau_change) + ")");
    r.check(g.plateau_checked && g.plateau, "plateau flag");
    return r;
}

Result c5() {
    Result r;
    for (const Params& p : {kP15, kP20}) {
        const std::string tag = "h1=" + fmt("%g", p.h1) + " ";
        const double a = solve_a(p).a;
        const SwitchHistory h = simulate(p, a, 100);
        bool all = true, inc = true, low = true;
        for (long n = 0; n <= 100; ++n) all &= h.switched(n);
        for (long n = 1; n <= 100 && all; ++n) {
            inc &= h.time_of(n) > h.time_of(n - 1);
            low &= h.time_of(n) >= p.c * n * n / (p.h1 - 2 * p.c);
        }
        r.check(all, tag + "all of 0..100 switch");
        r.check(inc, tag + "t_n increasing");
        r.check(low, tag + "t_n >= cn^2/(h1-2c)");

        const QnSeries q = extract_qn(h, a, 10, 100);
        std::vector<double> ns, env, raw;
        double m = 0;
        for (long n = 10; n <= 100; ++n) {
            m = std::max(m, std::abs(q.entries[n].q_over_sqrt_n));
            if (n > 80) {
                ns.push_back(n);
                env.push_back(m);
                raw.push_back(std::abs(q.entries[n].q_over_sqrt_n));
            }
        }
        const double es = ls_slope(ns, env);
        r.check(std::isfinite(q.fitted_E) && es <= 0.0, tag + "max|q_n|/sqrt(n)=" + fmt("%.4f", q.fitted_E) +
                                                            " envelope slope=" + fmt("%.2e", es) +
                                                            " (raw slope " + fmt("%.2e", ls_slope(ns, raw)) + ")");

        const GradAsymptotics g = grad_asymptotics(h, 10, 100, 10);
        std::vector<double> gn, gr;
        for (std::size_t i = 0; i < g.n.size(); ++i)
            if (g.n[i] > 80) {
                gn.push_back(g.n[i]);
                gr.push_back(std::abs(g.residual[i]));
            }
        const double gs = ls_slope(gn, gr);
        r.check(std::isfinite(g.A_fit), tag + "sup|grad+0.75h1|sqrt(n)=" + fmt("%.5f", g.A_fit));
        r.check(gs <= 0.0, tag + "its trailing-20 slope=" + fmt("%.2e", gs) + " (" + fmt("%.5f", gr.front()) + " -> " +
                               fmt("%.5f", gr.back()) + ")");
        r.check(g.bound_holds, tag + "max grad (n>=10)=" + fmt("%.5f", g.max_grad) + " <= " + fmt("%g", -0.375 * p.h1));
    }
    return r;
}

Result c6() {
    Result r;
    const double a = solve_a(kP15).a;
    const SwitchHistory h = simulate(kP15, a, 8);
    OdeOptions o;
    o.radius = 40;
    o.dt = 1e-3;
    o.stop_after = 8;
    o.t_end = 1.01 * h.time_of(8) + 1.0;
    const OdeResult od = ode_oracle(kP15, a, o);
    double rel = od.hist.frontier() >= 8 ? 0.0 : INFINITY;
    for (long n = 1; n <= std::min(8L, od.hist.frontier()); ++n)
        rel = std::max(rel, std::abs(od.hist.time_of(n) / h.time_of(n) - 1));
    r.check(rel <= 1e-4, "max relative gap t_1..t_8=" + fmt("%.2e", rel));
    return r;
}

Result c7() {
    Result r;
    for (const Params& p : {kP15, kP20}) {
        const double a = solve_a(p).a;
        const SwitchHistory h = simulate(p, a, 61);
        const QnSeries s = extract_qn(h, a, 10, 61);
        std::vector<double> q;
        for (const auto& e : s.entries) q.push_back(e.q);
        const double E = s.fitted_E + 0.5;
        double worst = 0, minJ = INFINITY, minD = INFINITY;
        for (long n = 9; n < 60; ++n) {
            CandidateState st;
            st.n = n;
            st.q.assign(q.begin(), q.begin() + n + 1);
            const CandidateResult c = candidate_step(p, a, st, E);
            worst = std::max(worst, std::abs(c.q_next - q[n + 1]) / std::sqrt(n + 1.0));
            minJ = std::min(minJ, c.min_J);
            minD = std::min(minD, c.min_D);
        }
        const std::string tag = "h1=" + fmt("%g", p.h1) + " ";
        r.check(worst <= 1e-5, tag + "max |q_cand-q_sim|/sqrt(n)=" + fmt("%.2e", worst));
        r.check(minJ >= 0.0 && minD > 0.0, tag + "min J=" + fmt("%.3e", minJ) + " min D=" + fmt("%.4f", minD));
    }
    return r;
}

Result c8() {
    Result r;
    const ConstantsTable& t = table20();
    const double a = rate20(), K = t.get("K"), Kp = t.get("K'");
    const long N = static_cast<long>(t.get("N"));
    double w1 = 0, w2 = 0;
    double prev = compute_Cn(N, a, kP20);
    for (long n = N; n <= 500; ++n) {
        const double next = compute_Cn(n + 1, a, kP20);
        w1 = std::max(w1, std::abs(prev) / std::sqrt(double(n)));
        w2 = std::max(w2, std::abs(next - prev) * std::sqrt(double(n)));
        prev = next;
    }
    r.check(w1 <= Kp, "max |C_n|/sqrt(n)=" + fmt("%.5f", w1) + " <= K'=" + fmt("%.5f", Kp));
    r.check(w2 <= K, "max |C_{n+1}-C_n| sqrt(n)=" + fmt("%.5f", w2) + " <= K=" + fmt("%.5f", K));
    return r;
}

Result c9() {
    Result r;
    const ConstantsTable& t = table20();
    const double pi = std::numbers::pi;
    const double R = t.get("R_scan"), R2000 = sum_R(2000);
    r.check(R <= pi + 1e-9, "R scan sup=" + fmt("%.10f", R));
    r.check(std::abs(R2000 - pi) <= 0.01, "R at n=2000=" + fmt("%.6f", R2000) + " (pi-R=" + fmt("%.4f", pi - R2000) + ")");
    r.check(t.get("p") <= 2 / std::exp(1.0), "p=" + fmt("%.5f", t.get("p")));
    r.check(t.get("D_p1") < 0.5, "D_p1=" + fmt("%.5f", t.get("D_p1")));
    r.check(t.get("kappa") > 0, "kappa=" + fmt("%.5f", t.get("kappa")) + " at N=" + fmt("%g", t.get("N")));
    r.check(t.get("E0") > 0, "E0=" + fmt("%.6f", t.get("E0")));
    return r;
}

Result c10() {
    Result r;
    const ConstantsTable& t = table20();
    const double E0 = t.get("E0");
    std::vector<RequirementReport> reps;
    long best = -1;
    for (int j = 0; j < 8; ++j) {
        reps.push_back(find_n0(E0 * std::pow(1.05, j), t));
        const long n0 = reps.back().n0;
        if (n0 > 0 && (best < 0 || n0 < reps[best].n0)) best = j;
    }
    r.check(best >= 0, "finite n0 on E0*1.05^j, j<8" +
                           (best >= 0 ? ": n0=" + fmt("%.0f", double(reps[best].n0)) + " at E=" + fmt("%.6f", reps[best].E)
                                      : std::string()));
    if (best < 0) return r;
    bool plateau = true;
    for (const auto& w : t.warnings) plateau &= w.rfind("plateau", 0) != 0;
    const SwitchHistory h = simulate(kP20, rate20(), reps[best].n0 + 1);
    bool any = false;
    std::string d;
    for (const auto& rep : reps) {
        if (rep.n0 < 0 || rep.n0 + 1 > h.frontier()) continue;
        const AdmissibilityResult ad = admissibility_verdict(rep.E, rep.n0, h);
        const Verdict v = final_verdict(rep, ad, plateau);
        any |= v == Verdict::admissible && ad.clause3;
        d += fmt("E=%.6f", rep.E) + " n0=" + std::to_string(rep.n0) + " grad=" + fmt("%.5f", ad.grad_n0) +
             " max|q|/(E sqrt n0)=" + fmt("%.4f", ad.max_q_ratio) + " -> " + verdict_name(v) + " ";
    }
    r.check(any, d + "(clause grad <= " + fmt("%g", -0.375 * kP20.h1) + ")");
    return r;
}

Result c11() {
    Result r;
    const Params p{0.5, 2.0, 2.0, 1.0};
    SimOptions o;
    o.t_max = 64000.0;
    const SwitchHistory h = simulate(p, solve_a(p).a, 400, o);
    const PatternStats s = pattern_stats(h, 199);
    r.check(s.N1 > 0 && std::abs(s.ratio - 1.0) <= 0.15,
            "N1=" + std::to_string(s.N1) + " N2=" + std::to_string(s.N2) + " undecided=" + std::to_string(s.undecided) +
                " ratio=" + fmt("%.4f", s.ratio) + " max switched node " + std::to_string(h.max_switched()));
    return r;
}

struct Criterion {
    int id;
    double limit_s;  // 0: none
    bool gating;
    std::function<Result()> fn;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, 0, true, c1},     {2, 10, true, c2},     {3, 30, true, c3},    {4, 600, true, c4},
        {5, 600, true, c5},   {6, 120, true, c6},    {7, 300, true, c7},   {8, 120, true, c8},
        {9, 60, true, c9},    {10, 1800, true, c10}, {11, 0, false, c11},
    };
    std::set<int> pick;
    for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& c : all) {
        if (!pick.empty() && !pick.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = c.fn();
        } catch (const std::exception& e) {
            r.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_s > 0) r.check(secs <= c.limit_s, "runtime limit " + fmt("%.0fs", c.limit_s));
        std::printf("criterion %d: %s%s (%.1fs) %s\n", c.id, r.pass ? "PASS" : "FAIL", c.gating ? "" : " [non-gating]",
                    secs, r.detail.c_str());
        std::fflush(stdout);
        if (!r.pass && c.gating) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
