#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rattle/errors.hpp"
#include "rattle/kernels.hpp"

using namespace rattle;

namespace {
const double kSqrtPi = std::sqrt(std::numbers::pi);

// f from its defining integral 2x int_x^inf y^{-2} h(y) dy, independent of the closed form.
double f_by_definition(double x) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    auto integrand = [](double y) { return std::exp(-0.25 * y * y) / (2.0 * kSqrtPi * y * y); };
    double inner = GK::integrate(integrand, x, x + 40.0, 30, 1e-15);
    return 2.0 * x * inner;
}
}  // namespace

TEST(Kernels, PointValues) {
    EXPECT_NEAR(eval_kernel(KernelId::h, 0.0), 0.2820947918, 1e-10);
    EXPECT_DOUBLE_EQ(eval_kernel(KernelId::h, 0.0), 1.0 / (2.0 * kSqrtPi));
    EXPECT_DOUBLE_EQ(eval_kernel(KernelId::g, 0.0), -0.5);
    EXPECT_NEAR(eval_kernel(KernelId::dh2, 0.0), -1.0 / (4.0 * kSqrtPi), 1e-16);
    EXPECT_EQ(eval_kernel(KernelId::dh1, 0.0), 0.0);
    EXPECT_NEAR(eval_kernel(KernelId::dh4, 0.0), 3.0 / (8.0 * kSqrtPi), 1e-16);
}

TEST(Kernels, FourthDerivativeByCentralDifference) {
    const double d = 1e-2;
    auto h = [](double x) { return kernel_h(x); };
    // 4th derivative, O(d^2) five-point stencil, then Richardson step to O(d^4).
    auto d4 = [&](double s) {
        return (h(-2 * s) - 4 * h(-s) + 6 * h(0) - 4 * h(s) + h(2 * s)) / std::pow(s, 4);
    };
    double rich = (4.0 * d4(d) - d4(2 * d)) / 3.0;
    EXPECT_NEAR(rich, eval_kernel(KernelId::dh4, 0.0), 1e-6);
}

TEST(Kernels, FAgreesWithDefiningIntegral) {
    for (double x : {0.25, 1.0, 2.5, 5.0}) {
        EXPECT_NEAR(eval_kernel(KernelId::f, x), f_by_definition(x), 1e-12) << "x = " << x;
    }
}

TEST(Kernels, FtildeMatchesThirdDerivativeQuotient) {
    for (double x : {1e-3, 0.1, 1.0, 3.0, 7.0}) {
        double quotient = -kernel_h_deriv(3, x) / (6.0 * x);
        EXPECT_NEAR(eval_kernel(KernelId::ftilde, x), quotient, 1e-14) << "x = " << x;
    }
    EXPECT_DOUBLE_EQ(eval_kernel(KernelId::ftilde, 0.0), -eval_kernel(KernelId::dh4, 0.0) / 6.0);
}

TEST(Kernels, IdentitySuite) {
    for (int i = 0; i < 64; ++i) {
        double x = 8.0 * i / 63.0;
        const double e = 1e-5;
        double lo = std::max(x - e, 0.0);
        double hi = lo + 2 * e;
        double mid = 0.5 * (lo + hi);
        double gprime = (kernel_g(hi) - kernel_g(lo)) / (hi - lo);
        EXPECT_LE(std::abs(gprime - kernel_h(mid)), 1e-9) << x;
        const double e2 = 1e-4;
        double xm = std::max(x, e2);
        double fpp = (kernel_f(xm + e2) - 2 * kernel_f(xm) + kernel_f(xm - e2)) / (e2 * e2);
        EXPECT_LE(std::abs(fpp - kernel_h(xm)), 1e-6) << x;
        EXPECT_LE(std::abs(2 * kernel_h(x) + x * kernel_g(x) - kernel_f(x)), 1e-12) << x;
    }
}

TEST(Kernels, Decay) {
    for (double x = 12.0; x <= 40.0; x += 0.5) {
        for (KernelId id : {KernelId::h, KernelId::f, KernelId::g, KernelId::ftilde, KernelId::dh1,
                            KernelId::dh2, KernelId::dh3, KernelId::dh4}) {
            EXPECT_LE(std::abs(eval_kernel(id, x)), 1e-12);
        }
    }
}

TEST(Kernels, DomainErrors) {
    EXPECT_THROW(eval_kernel(KernelId::h, -0.1), DomainError);
    EXPECT_THROW(h_deriv_id(5), DomainError);
    EXPECT_THROW(eval_profile(ProfileId::H, 1.0, 1.0), DomainError);
    EXPECT_THROW(eval_profile(ProfileId::H, 1.0, -1.0), DomainError);
    EXPECT_THROW(eval_profile(ProfileId::G, -1.0, 0.0), DomainError);
}

TEST(Profiles, EndpointsAndValues) {
    const double a = 1.3;
    EXPECT_NEAR(eval_profile(ProfileId::G, a, 1.0 - 1e-14), -0.5, 1e-7);
    EXPECT_NEAR(eval_profile(ProfileId::F, a, 1.0 - 1e-14), 0.0, 1e-6);
    EXPECT_EQ(profile_closed(ProfileId::F, a, 1.0), 0.0);
    EXPECT_EQ(profile_closed(ProfileId::G, a, 1.0), -0.5);
    EXPECT_EQ(profile_closed(ProfileId::H, a, -1.0), 0.0);
    EXPECT_NEAR(eval_profile(ProfileId::H, 1.0, 0.0), kernel_h(1.0), 1e-15);
    EXPECT_NEAR(eval_profile(ProfileId::H, 1.0, 0.0), 0.2197, 1e-4);
    // Near x = 1, H behaves like h(0) / sqrt(2a(1-x)).
    double s = 1e-12;
    EXPECT_NEAR(eval_profile_omx(ProfileId::H, a, s) * std::sqrt(2 * a * s), kernel_h(0.0), 1e-9);
}

TEST(Integrals, IdentitiesAndFormsAgree) {
    for (double a : {0.05, 0.3, 1.0, 1.3349, 4.0, 20.0}) {
        double ih = integral_I(ProfileId::H, a, IntegralForm::substituted, 1e-13).value;
        double ig = integral_I(ProfileId::G, a, IntegralForm::substituted, 1e-13).value;
        double iF = integral_I(ProfileId::F, a, IntegralForm::substituted, 1e-13).value;
        double iho = integral_I(ProfileId::H, a, IntegralForm::original, 1e-13).value;
        double igo = integral_I(ProfileId::G, a, IntegralForm::original, 1e-13).value;
        double ifo = integral_I(ProfileId::F, a, IntegralForm::original, 1e-13).value;
        EXPECT_NEAR(ig, ih - 1.0, 2e-13) << a;
        EXPECT_NEAR(iF, 0.5 * ((2 * a + 1) * ih - 1.0), 2e-13 * (1 + a)) << a;
        EXPECT_NEAR(ih, iho, 1e-12) << a;
        EXPECT_NEAR(ig, igo, 1e-12) << a;
        EXPECT_NEAR(iF, ifo, 1e-12) << a;
    }
}

TEST(Integrals, MonotoneAndLimits) {
    double prev = 2.0;
    for (double a = 1e-3; a < 1e3; a *= 1.7) {
        double v = I_H(a);
        EXPECT_LT(v, prev);
        prev = v;
    }
    EXPECT_GE(I_H(1e-4), 0.99);
    EXPECT_LE(I_H(1e4), 0.02);
    EXPECT_LT(substituted_tail_bound(0.05), 1e-25);
}

TEST(Integrals, FtildeFormsAgree) {
    double a = 1.3;
    double s = integral_I(ProfileId::Ftilde, a, IntegralForm::substituted, 1e-13).value;
    double o = integral_I(ProfileId::Ftilde, a, IntegralForm::original, 1e-13).value;
    EXPECT_NEAR(s, o, 1e-12);
}
