#pragma once

namespace rattle {

enum class KernelId { h, f, g, ftilde, dh1, dh2, dh3, dh4 };

// KernelId for the k-th derivative of h, 1 <= k <= 4.
KernelId h_deriv_id(int k);

// h, f, g, f~ and h', ..., h'''' on x >= 0.
double eval_kernel(KernelId id, double x);

double kernel_h(double x);
double kernel_f(double x);
double kernel_g(double x);
double kernel_ftilde(double x);
// k-th derivative of h for any k >= 0 via the Hermite recurrence. Defined on all of R.
double kernel_h_deriv(int k, double x);

enum class ProfileId { F, G, H, H1, Ftilde };

// Profiles on (-1, 1).
double eval_profile(ProfileId id, double a, double x);
// Same profile parametrised by s = 1 - x in (0, 2]. Use this near x = 1.
double eval_profile_omx(ProfileId id, double a, double s);
// Profile with the endpoint limits filled in: 0 at x = -1 for every profile, and
// the finite limits at x = 1 for F and G. Throws at x = 1 for H, H1 and Ftilde.
double profile_closed(ProfileId id, double a, double x);

enum class IntegralForm { original, substituted };

struct Integral {
    double value = 0.0;
    double error = 0.0;
};

// Integral of a profile over (-1, 1). Supported: F, G, H, Ftilde.
Integral integral_I(ProfileId id, double a, IntegralForm form, double tol);

// Convenience wrappers (substituted form, tol 1e-14 (1 + a)).
double I_F(double a);
double I_G(double a);
double I_H(double a);

// Upper limit used for the infinite substituted range and a bound on the
// neglected tail.
inline constexpr double kSubstitutedYmax = 16.0;
double substituted_tail_bound(double a);

}  // namespace rattle
