#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rattle/errors.hpp"
#include "rattle/green.hpp"
#include "rattle/rate.hpp"
#include "rattle/sim.hpp"

using namespace rattle;

namespace {

const Params kP15{0.5, 1.5, 0.0, 1.0};
const Params kP20{0.5, 2.0, 0.0, 1.0};

double rate(const Params& p) {
    static double a15 = solve_a(kP15).a, a20 = solve_a(kP20).a;
    if (p.h1 == 1.5 && p.c == 0.5) return a15;
    if (p.h1 == 2.0 && p.c == 0.5) return a20;
    return solve_a(p).a;
}

const SwitchHistory& hist15() {
    static SwitchHistory h = simulate(kP15, rate(kP15), 40);
    return h;
}

}  // namespace

TEST(Sim, InitialConfiguration) {
    SwitchHistory h = initial_history(kP20, rate(kP20));
    ASSERT_EQ(h.records.size(), 1u);
    EXPECT_EQ(h.records[0].n, 0);
    EXPECT_EQ(h.records[0].t, 0.0);
    EXPECT_EQ(h.records[0].q, 0.0);
    EXPECT_DOUBLE_EQ(h.records[0].grad, -0.5);
    for (long n : {1L, 3L, 10L}) EXPECT_DOUBLE_EQ(eval_u(n, 0.0, h), -0.5 * n * n);
    EXPECT_EQ(eval_u(0, 0.0, h), 0.0);
    for (long n : {0L, 2L, 5L}) EXPECT_DOUBLE_EQ(eval_grad_u(n, 0.0, h), -0.5 * (2 * n + 1));
}

TEST(Sim, SmallTimeMatchesFirstStage) {
    SwitchHistory h = initial_history(kP15, rate(kP15));
    for (long n : {1L, 2L, 4L})
        for (double t : {0.3, 1.0, 2.5}) {
            const double z = -0.5 * n * n + 0.5 * t - 1.5 * green_y(n, t);
            EXPECT_NEAR(eval_u(n, t, h), z, 1e-12);
        }
}

TEST(Sim, LowerBoundAndOrder) {
    const SwitchHistory& h = hist15();
    EXPECT_GE(h.frontier(), 40);
    for (long n = 1; n <= 40; ++n) {
        EXPECT_GE(h.time_of(n), 0.5 * n * n / (1.5 - 1.0));
        EXPECT_GT(h.time_of(n), h.time_of(n - 1));
        EXPECT_LE(std::abs(eval_u(n, h.time_of(n), h)), 1e-9);
    }
}

TEST(Sim, QnBoundedAndGradientNegative) {
    const SwitchHistory& h = hist15();
    for (const auto& r : h.records) {
        if (r.n < 10) continue;
        EXPECT_LT(std::abs(r.q) / std::sqrt(static_cast<double>(r.n)), 3.0);
        EXPECT_LT(r.grad, -0.375 * 1.5);
    }
}

TEST(Sim, AgreesWithOdeOracle) {
    const double a = rate(kP15);
    const SwitchHistory& h = hist15();
    OdeOptions o;
    o.radius = 40;
    o.dt = 1e-3;
    o.stop_after = 8;
    o.t_end = 1.01 * h.time_of(8) + 1.0;
    OdeResult r = ode_oracle(kP15, a, o);
    ASSERT_GE(r.hist.frontier(), 8);
    for (long n = 1; n <= 8; ++n) EXPECT_LE(std::abs(r.hist.time_of(n) / h.time_of(n) - 1.0), 1e-4) << n;
    EXPECT_LE(r.max_asymmetry, 1e-12);
    EXPECT_LE(r.max_boundary_u, -0.5 * 40 * 40 / 2.0);
}

TEST(Sim, OdeFreeSolutionIsExact) {
    OdeOptions o;
    o.radius = 20;
    o.dt = 1e-2;
    o.t_end = 30.0;
    o.relays = false;
    OdeResult r = ode_oracle(kP20, rate(kP20), o);
    EXPECT_LE(r.max_free_deviation, 1e-10);
    EXPECT_LE(r.max_asymmetry, 1e-12);
}

TEST(Sim, OdeRejectsSmallRadius) {
    OdeOptions o;
    o.radius = 3;
    o.dt = 1e-2;
    o.t_end = 200.0;
    EXPECT_THROW(ode_oracle(kP20, rate(kP20), o), PreconditionError);
}

TEST(Sim, RepresentationSatisfiesLatticeOde) {
    const SwitchHistory& h = hist15();
    const double eps = 1e-4;
    for (long step = 12; step <= 30; step += 6) {
        const double t0 = h.time_of(step - 1), t1 = h.time_of(step);
        for (double f : {0.25, 0.5, 0.75}) {
            const double t = t0 + f * (t1 - t0);
            for (long n : {step - 2, step, step + 1, step + 4}) {
                const double fd = (eval_u(n, t + eps, h) - eval_u(n, t - eps, h)) / (2 * eps);
                const double lap = eval_u(n + 1, t, h) + eval_u(n - 1, t, h) - 2 * eval_u(n, t, h);
                const double drive = h.switched(n) && h.time_of(n) < t ? 0.0 : 1.5;
                EXPECT_LE(std::abs(fd - (lap + drive)), 1e-6) << n << " " << t;
                const UDerivs d = eval_u_derivs(n, t, h);
                EXPECT_LE(std::abs(d.udot - (lap + drive)), 1e-8);
            }
        }
    }
}

TEST(Sim, GradientAndLaplacianAheadOfFrontier) {
    const SwitchHistory& h = hist15();
    for (long n = 12; n <= 40; n += 7) {
        const double t0 = h.time_of(n - 1), t1 = h.time_of(n);
        for (double f : {0.1, 0.5, 1.0}) {
            const double t = t0 + f * (t1 - t0);
            for (long j = n; j <= n + 5; ++j) {
                EXPECT_LT(eval_grad_u(j, t, h), 0.0);
                const double lap = eval_u(j + 1, t, h) + eval_u(j - 1, t, h) - 2 * eval_u(j, t, h);
                EXPECT_LE(lap, -0.5 + 1e-9);
            }
        }
    }
}

TEST(Sim, NoSwitchBeforeOwnMoment) {
    const SwitchHistory& h = hist15();
    for (long n = 2; n <= 40; ++n) {
        NoSwitchReport r = no_switch_diagnostic(n, h, 24, 0.5);
        EXPECT_LT(r.max_v, 0.0) << n;
        EXPECT_LE(std::abs(r.v_at_end), 1e-9);
        if (n >= 10) EXPECT_LE(r.v_at_start, -0.375 * 1.5);
    }
}

TEST(Sim, Deterministic) {
    SwitchHistory a = simulate(kP20, rate(kP20), 25);
    SwitchHistory b = simulate(kP20, rate(kP20), 25);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].n, b.records[i].n);
        EXPECT_EQ(a.records[i].t, b.records[i].t);
        EXPECT_EQ(a.records[i].grad, b.records[i].grad);
    }
    std::ostringstream sa, sb;
    write_history_csv(sa, a);
    write_history_csv(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
}

TEST(Sim, ScalingOfThresholdParameters) {
    const Params p2{1.0, 4.0, 0.0, 1.0};
    const double a1 = rate(kP20), a2 = solve_a(p2).a;
    EXPECT_NEAR(a1, a2, 1e-11);
    SwitchHistory h1 = simulate(kP20, a1, 20);
    SwitchHistory h2 = simulate(p2, a2, 20);
    for (long n = 1; n <= 20; ++n) EXPECT_NEAR(h1.time_of(n), h2.time_of(n), 1e-9 * h1.time_of(n));
}

TEST(Sim, CsvLayout) {
    std::ostringstream os;
    write_history_csv(os, hist15());
    const std::string s = os.str();
    EXPECT_EQ(s.substr(0, s.find("\r\n")), "n,t_n,q_n,q_n/sqrt(n),grad,grad+0.75*h1");
    EXPECT_NE(s.find("\r\n0,0,0,0,-0.5,"), std::string::npos);
}

TEST(Sim, RattlingHorizon) {
    const Params p{0.5, 2.0, 2.0, 1.0};
    SimOptions o;
    o.t_max = 150.0;
    SwitchHistory h = simulate(p, rate(kP20), 1000, o);
    EXPECT_EQ(h.complete_to, 150.0);
    EXPECT_GE(h.max_switched(), 2);
}

TEST(Sim, Preconditions) {
    EXPECT_THROW(simulate(Params{0.5, 1.0, 0.0, 1.0}, 1.0, 5), PreconditionError);
    EXPECT_THROW(simulate(kP20, rate(kP20), 0), PreconditionError);
}
