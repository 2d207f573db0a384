#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rattle {

enum class GreenMethod { fourier, bessel };

// y_n(t) and its derivatives. grad_* is the forward difference in n.
struct GreenEval {
    long n = 0;
    double t = 0.0;
    double y = 0.0, ydot = 0.0, yddot = 0.0;
    double grad_y = 0.0, grad_ydot = 0.0, grad_yddot = 0.0;
    GreenMethod method = GreenMethod::fourier;
    long quad_points = 0;
};

// Trapezoid rule with M nodes on the Fourier integral. The t-independent part of
// the y integrand is summed in closed form and the Gaussian factor is dropped once
// it falls below e^{-60}, so the cost is O(M / sqrt(t)) for large t.
GreenEval green_trapezoid(long n, double t, long M);

// Fourier evaluation; M starts at max(256, alias-free count) and is doubled until
// two successive results differ by at most tol * max(1, |value|) in every
// component. For t > 15 the y and grad_y comparisons also allow 32 eps M, the
// rounding of the closed-sum form. Throws ConvergenceError past 2^22 points.
GreenEval eval_green(long n, double t, double tol = 1e-13);

// Node count for which the aliasing error sum_{j != 0} y_{n + jM}(t) is below
// e^{-60} scale (Chernoff bound on the symmetric Skellam law).
long green_alias_free_points(long nmax, double t);

// y_m(tau) for every m in ms, sharing one node set. If grad is non-empty it
// receives y_{m+1}(tau) - y_m(tau). Returns 0 for tau <= 0.
void green_y_batch(double tau, std::span<const long> ms, std::span<double> y,
                   std::span<double> grad = {});
double green_y(long m, double tau);

// Full GreenEval for every m at one tau on the alias-free node count, without the
// doubling check of eval_green.
void green_eval_batch(double tau, std::span<const long> ms, std::span<GreenEval> out);

// (y_n(tau + d) - y_n(tau)) / d, formed term by term from the Fourier sum so that
// nothing cancels for small d; equals ydot_n(tau) at d = 0. y vanishes for negative
// times, so tau + d < 0 is allowed.
double green_y_quotient(long n, double tau, double d);

// e^{-2t} I_n(2t): power series for t <= 1, Miller backward recurrence otherwise.
double eval_ydot_bessel(long n, double t);

// All m in [0, mmax] at one t from a single Miller sweep. y and grad_y use the
// positive sums y_m = sum_{i>m} (i-m) ydot_i and grad y_m = -sum_{i>m} ydot_i.
struct GreenTable {
    double t = 0.0;
    std::vector<double> y, ydot, yddot, grad_y;
};
GreenTable green_bessel_table(double t, long mmax);

enum class RemainderId { r0, rtilde1, r1, r2, w0, w1 };
const char* remainder_name(RemainderId id);

// Difference between the Green quantity and its leading asymptotic terms at
// x = n / sqrt(t). Throws DomainError for t < tau0.
double eval_remainder(RemainderId id, long n, double t, double tau0);

// Memo of eval_green keyed by exact (n, t). Insert-if-absent under a lock;
// dump/load use a versioned little-endian binary layout.
class GreenCache {
public:
    explicit GreenCache(double tol = 1e-13) : tol_(tol) {}
    GreenEval get(long n, double t);
    std::size_t size() const;
    void dump(std::ostream& os) const;
    void load(std::istream& is);
    void dump_file(const std::string& path) const;
    void load_file(const std::string& path);

private:
    double tol_;
    mutable std::mutex mu_;
    std::map<std::pair<long, std::uint64_t>, GreenEval> map_;
};

}  // namespace rattle
