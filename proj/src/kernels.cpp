#include "rattle/kernels.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "rattle/errors.hpp"
#include "rattle/quadrature.hpp"

namespace rattle {

namespace {

constexpr double kInv2SqrtPi = 0.5 * std::numbers::inv_sqrtpi;

void require_nonneg(double x, const char* what) {
    if (!(x >= 0.0)) {
        std::ostringstream os;
        os << what << ": argument " << x << " outside [0, inf)";
        throw DomainError(os.str());
    }
}

// Physicists' Hermite polynomial H_k(s).
double hermite(int k, double s) {
    double hm = 1.0;
    if (k == 0) return hm;
    double hk = 2.0 * s;
    for (int j = 1; j < k; ++j) {
        double next = 2.0 * s * hk - 2.0 * j * hm;
        hm = hk;
        hk = next;
    }
    return hk;
}

// z = a^{-1/2} sqrt(s / (2 - s)) with s = 1 - x, and w = a (1 - x^2) = a s (2 - s).
struct ProfileArg {
    double z;
    double w;
};

ProfileArg profile_arg(double a, double s) {
    double opx = 2.0 - s;
    return {std::sqrt(s / opx) / std::sqrt(a), a * s * opx};
}

void check_profile_domain(double a, double s) {
    if (!(a > 0.0)) throw DomainError("profile: a must be positive");
    if (!(s > 0.0 && s < 2.0)) {
        std::ostringstream os;
        os << "profile: x = " << 1.0 - s << " outside (-1, 1)";
        throw DomainError(os.str());
    }
}

}  // namespace

KernelId h_deriv_id(int k) {
    switch (k) {
        case 1: return KernelId::dh1;
        case 2: return KernelId::dh2;
        case 3: return KernelId::dh3;
        case 4: return KernelId::dh4;
        default: throw DomainError("h derivative order must be in 1..4");
    }
}

double kernel_h(double x) { return kInv2SqrtPi * std::exp(-0.25 * x * x); }

double kernel_h_deriv(int k, double x) {
    if (k < 0) throw DomainError("negative derivative order");
    // d^k/dx^k e^{-x^2/4} = (-1/2)^k H_k(x/2) e^{-x^2/4}
    return std::pow(-0.5, k) * hermite(k, 0.5 * x) * kernel_h(x);
}

double kernel_g(double x) { return -0.5 * std::erfc(0.5 * x); }

double kernel_f(double x) { return 2.0 * kernel_h(x) + x * kernel_g(x); }

double kernel_ftilde(double x) {
    if (x < 1e-4) return -kernel_h_deriv(4, 0.0) / 6.0;
    return kernel_h(x) * (x * x / 48.0 - 0.125);
}

double eval_kernel(KernelId id, double x) {
    require_nonneg(x, "eval_kernel");
    switch (id) {
        case KernelId::h: return kernel_h(x);
        case KernelId::f: return kernel_f(x);
        case KernelId::g: return kernel_g(x);
        case KernelId::ftilde: return kernel_ftilde(x);
        case KernelId::dh1: return kernel_h_deriv(1, x);
        case KernelId::dh2: return kernel_h_deriv(2, x);
        case KernelId::dh3: return kernel_h_deriv(3, x);
        case KernelId::dh4: return kernel_h_deriv(4, x);
    }
    throw DomainError("eval_kernel: unknown kernel id");
}

double eval_profile_omx(ProfileId id, double a, double s) {
    check_profile_domain(a, s);
    auto [z, w] = profile_arg(a, s);
    switch (id) {
        case ProfileId::F: return std::sqrt(w) * kernel_f(z);
        case ProfileId::G: return kernel_g(z);
        case ProfileId::H: return kernel_h(z) / std::sqrt(w);
        case ProfileId::H1: return kernel_h_deriv(1, z) / w;
        case ProfileId::Ftilde: return kernel_ftilde(z) / std::sqrt(w);
    }
    throw DomainError("eval_profile: unknown profile id");
}

double eval_profile(ProfileId id, double a, double x) {
    if (!(x > -1.0 && x < 1.0)) {
        std::ostringstream os;
        os << "profile: x = " << x << " outside (-1, 1)";
        throw DomainError(os.str());
    }
    return eval_profile_omx(id, a, 1.0 - x);
}

double profile_closed(ProfileId id, double a, double x) {
    if (x == -1.0) return 0.0;
    if (x == 1.0) {
        if (id == ProfileId::F) return 0.0;
        if (id == ProfileId::G) return kernel_g(0.0);
    }
    return eval_profile(id, a, x);
}

double substituted_tail_bound(double a) {
    const double y = kSubstitutedYmax;
    return std::erfc(0.5 * y) * (1.0 + y * y / 48.0 + 8.0 / (a * y * y * y));
}

Integral integral_I(ProfileId id, double a, IntegralForm form, double tol) {
    if (!(a > 0.0)) throw DomainError("integral_I: a must be positive");
    if (!(tol > 0.0)) throw DomainError("integral_I: tol must be positive");
    if (id == ProfileId::H1) throw DomainError("integral_I: H1 has no tabulated integral");

    if (form == IntegralForm::substituted) {
        auto integrand = [id, a](double y) {
            double q = 1.0 + a * y * y;
            switch (id) {
                case ProfileId::F: return 8.0 * a * a * y * y * kernel_f(y) / (q * q * q);
                case ProfileId::G: return 4.0 * a * y * kernel_g(y) / (q * q);
                case ProfileId::H: return 2.0 * kernel_h(y) / q;
                default: return 2.0 * kernel_ftilde(y) / q;
            }
        };
        Integral r = gk_integrate(integrand, 0.0, kSubstitutedYmax, 0.5 * tol);
        r.error += substituted_tail_bound(a);
        return r;
    }

    // Left half directly; right half with x = 1 - u^2 so the (1-x)^{-1/2}
    // endpoint behaviour becomes smooth in u.
    auto left = [id, a](double x) { return eval_profile_omx(id, a, 1.0 - x); };
    auto right = [id, a](double u) {
        double s = u * u;
        return 2.0 * u * eval_profile_omx(id, a, s);
    };
    Integral l = gk_integrate(left, -1.0, 0.0, 0.5 * tol);
    Integral r = gk_integrate(right, 0.0, 1.0, 0.5 * tol);
    return {l.value + r.value, l.error + r.error};
}

double I_F(double a) { return integral_I(ProfileId::F, a, IntegralForm::substituted, 1e-14 * (1.0 + a)).value; }
double I_G(double a) { return integral_I(ProfileId::G, a, IntegralForm::substituted, 1e-14 * (1.0 + a)).value; }
double I_H(double a) { return integral_I(ProfileId::H, a, IntegralForm::substituted, 1e-14 * (1.0 + a)).value; }

}  // namespace rattle
