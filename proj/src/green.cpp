#include "rattle/green.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "rattle/errors.hpp"
#include "rattle/kernels.hpp"

namespace rattle {

namespace {

constexpr double kPi = std::numbers::pi;
// Gaussian factors below e^{-60} are dropped.
constexpr double kExpCut = 60.0;
constexpr long kMaxPoints = 1L << 22;

long mod_pos(long a, long m) {
    long r = a % m;
    return r < 0 ? r + m : r;
}

void check_time(double t, const char* what) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
        std::ostringstream os;
        os << what << ": time " << t << " must be finite and nonnegative";
        throw DomainError(os.str());
    }
}

// Exact values at t = 0: y = 0, ydot = delta_{n,0}, yddot = (Delta delta)_n.
GreenEval green_at_zero(long n) {
    auto d = [](long m) { return m == 0 ? 1.0 : 0.0; };
    auto dd = [&](long m) { return d(m - 1) - 2.0 * d(m) + d(m + 1); };
    GreenEval e;
    e.n = n;
    e.ydot = d(n);
    e.yddot = dd(n);
    e.grad_ydot = d(n + 1) - d(n);
    e.grad_yddot = dd(n + 1) - dd(n);
    return e;
}

// Half-sum tables over j = 1..J of the M-point rule (symmetry j <-> M - j):
// s_j = sin(pi j / M), w_j = weight * exp(-4 t s_j^2), d_j = weight - w_j.
// When no node is cut the y and grad_y sums are formed from d_j directly, which
// avoids cancelling the O(M) closed lattice sum against the small-j terms.
struct NodeTable {
    long M = 0;
    bool complete = false;
    std::vector<long> j;
    std::vector<double> s, w, d;
};

void build_nodes(double t, long M, NodeTable& tab) {
    tab.M = M;
    tab.j.clear();
    tab.s.clear();
    tab.w.clear();
    tab.d.clear();
    const long half = (M - 1) / 2;
    const double step = kPi / static_cast<double>(M);
    auto push = [&](long j, double weight) {
        double s = std::sin(step * static_cast<double>(j));
        double ex = 4.0 * t * s * s;
        if (ex > kExpCut) return false;
        tab.j.push_back(j);
        tab.s.push_back(s);
        tab.w.push_back(weight * std::exp(-ex));
        tab.d.push_back(-weight * std::expm1(-ex));
        return true;
    };
    bool all = true;
    for (long j = 1; j <= half; ++j) {
        if (!push(j, 2.0)) {
            all = false;
            break;
        }
    }
    if (all && M % 2 == 0) all = push(M / 2, 1.0);
    tab.complete = all;
}

// sum_{j != 0} cos(2 pi n j / M) / (4 sin^2(pi j / M)) for 0 <= n < M.
double closed_part(long nmod, long M) {
    double Md = static_cast<double>(M);
    double q = static_cast<double>(nmod) * static_cast<double>(M - nmod);
    return 0.25 * ((Md * Md - 1.0) / 3.0 - 2.0 * q);
}

// Difference of closed_part between n+1 and n (n signed).
double closed_part_diff(long n, long M) {
    long a0 = mod_pos(n, M), a1 = mod_pos(n + 1, M);
    double q0 = static_cast<double>(a0) * static_cast<double>(M - a0);
    double q1 = static_cast<double>(a1) * static_cast<double>(M - a1);
    return -0.5 * (q1 - q0);
}

// Gradient of y at n < 0 via the reflection grad y_n = -grad y_{-n-1}, so that
// every evaluation works with nonnegative indices and is exactly symmetric.
struct GradIndex {
    long index;
    double sign;
};
GradIndex grad_index(long n) { return n >= 0 ? GradIndex{n, 1.0} : GradIndex{-n - 1, -1.0}; }

GreenEval trapezoid_from_nodes(long n, double t, const NodeTable& tab) {
    const long M = tab.M;
    const long nm = std::abs(n) % M;
    const GradIndex gi = grad_index(n);
    const long tw = (2 * (gi.index % (2 * M)) + 1) % (2 * M);
    const double Md = static_cast<double>(M);
    const bool direct = tab.complete;
    double sy = 0, syd = 0, sydd = 0, sgy = 0, sgyd = 0, sgydd = 0;
    for (std::size_t i = 0; i < tab.j.size(); ++i) {
        const long j = tab.j[i];
        const double s = tab.s[i], w = tab.w[i], wy = direct ? tab.d[i] : w;
        const double cs = std::cos(2.0 * kPi * static_cast<double>((nm * j) % M) / Md);
        const double sn = std::sin(kPi * static_cast<double>((tw * j) % (2 * M)) / Md);
        const double s2 = s * s;
        sy += cs * wy / (4.0 * s2);
        syd += cs * w;
        sydd -= 4.0 * s2 * cs * w;
        sgy += sn * wy / (2.0 * s);
        sgyd -= 2.0 * sn * s * w;
        sgydd += 8.0 * s2 * s * sn * w;
    }
    GreenEval e;
    e.n = n;
    e.t = t;
    e.y = std::max(0.0, (direct ? t + sy : t + closed_part(nm, M) - sy) / Md);
    e.ydot = std::max(0.0, (1.0 + syd) / Md);
    e.yddot = sydd / Md;
    e.grad_y = gi.sign * (direct ? -sgy : closed_part_diff(gi.index, M) + sgy) / Md;
    e.grad_ydot = gi.sign * sgyd / Md;
    e.grad_yddot = gi.sign * sgydd / Md;
    e.method = GreenMethod::fourier;
    e.quad_points = M;
    return e;
}

// floor absorbs the rounding of the closed-sum form of y and grad_y, which is
// of order M * eps in absolute terms when nodes are cut.
bool close(const GreenEval& a, const GreenEval& b, double tol, double floor) {
    auto ok = [tol](double u, double v, double fl) {
        return std::abs(u - v) <= tol * std::max(1.0, std::max(std::abs(u), std::abs(v))) + fl;
    };
    return ok(a.y, b.y, floor) && ok(a.ydot, b.ydot, 0) && ok(a.yddot, b.yddot, 0) &&
           ok(a.grad_y, b.grad_y, floor) && ok(a.grad_ydot, b.grad_ydot, 0) && ok(a.grad_yddot, b.grad_yddot, 0);
}

double negligible_index(double tau) { return std::max(std::sqrt(260.7 * tau), 2.0 * kExpCut); }

}  // namespace

GreenEval green_trapezoid(long n, double t, long M) {
    check_time(t, "green_trapezoid");
    if (M < 2) throw DomainError("green_trapezoid: need at least 2 nodes");
    if (t == 0.0) {
        GreenEval e = green_at_zero(n);
        e.quad_points = M;
        return e;
    }
    NodeTable tab;
    build_nodes(t, M, tab);
    return trapezoid_from_nodes(n, t, tab);
}

GreenEval eval_green(long n, double t, double tol) {
    check_time(t, "eval_green");
    if (!(tol > 0.0)) throw DomainError("eval_green: tol must be positive");
    if (t == 0.0) return green_at_zero(n);
    long M = std::max(256L, green_alias_free_points(std::abs(n) + 1, t));
    GreenEval prev = green_trapezoid(n, t, M);
    while (true) {
        M *= 2;
        if (M > kMaxPoints) {
            std::ostringstream os;
            os << "eval_green(" << n << ", " << t << "): no agreement to " << tol << " below 2^22 points";
            throw ConvergenceError(os.str());
        }
        GreenEval next = green_trapezoid(n, t, M);
        const double floor = 4.0 * t > kExpCut ? 32.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(M) : 0.0;
        if (close(prev, next, tol, floor)) return next;
        prev = next;
    }
}

long green_alias_free_points(long nmax, double t) {
    return std::abs(nmax) + static_cast<long>(std::ceil(negligible_index(t))) + 1;
}

void green_y_batch(double tau, std::span<const long> ms, std::span<double> y, std::span<double> grad) {
    const bool want_grad = !grad.empty();
    if (!(tau > 0.0)) {
        std::fill(y.begin(), y.end(), 0.0);
        if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
        return;
    }
    const double cut = negligible_index(tau);
    long mmax = -1;
    for (long m : ms) {
        long lo = want_grad ? std::min(std::abs(m), std::abs(m + 1)) : std::abs(m);
        if (static_cast<double>(lo) < cut) mmax = std::max(mmax, std::abs(m) + (want_grad ? 1 : 0));
    }
    if (mmax < 0) {
        std::fill(y.begin(), y.end(), 0.0);
        if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
        return;
    }
    thread_local NodeTable tab;
    const long M = green_alias_free_points(mmax, tau);
    build_nodes(tau, M, tab);
    const double Md = static_cast<double>(M);
    for (std::size_t i = 0; i < ms.size(); ++i) {
        const long m = ms[i];
        const long lo = want_grad ? std::min(std::abs(m), std::abs(m + 1)) : std::abs(m);
        if (static_cast<double>(lo) >= cut) {
            y[i] = 0.0;
            if (want_grad) grad[i] = 0.0;
            continue;
        }
        const long nm = std::abs(m) % M;
        const GradIndex gi = grad_index(m);
        const long tw = (2 * (gi.index % (2 * M)) + 1) % (2 * M);
        const bool direct = tab.complete;
        double sy = 0.0, sgy = 0.0;
        for (std::size_t k = 0; k < tab.j.size(); ++k) {
            const long j = tab.j[k];
            const double s = tab.s[k], w = direct ? tab.d[k] : tab.w[k];
            sy += std::cos(2.0 * kPi * static_cast<double>((nm * j) % M) / Md) * w / (4.0 * s * s);
            if (want_grad) sgy += std::sin(kPi * static_cast<double>((tw * j) % (2 * M)) / Md) * w / (2.0 * s);
        }
        y[i] = std::max(0.0, (direct ? tau + sy : tau + closed_part(nm, M) - sy) / Md);
        if (want_grad) grad[i] = gi.sign * (direct ? -sgy : closed_part_diff(gi.index, M) + sgy) / Md;
    }
}

double green_y(long m, double tau) {
    double out = 0.0;
    long mm = m;
    green_y_batch(tau, std::span<const long>(&mm, 1), std::span<double>(&out, 1));
    return out;
}

void green_eval_batch(double tau, std::span<const long> ms, std::span<GreenEval> out) {
    check_time(tau, "green_eval_batch");
    if (tau == 0.0) {
        for (std::size_t i = 0; i < ms.size(); ++i) out[i] = green_at_zero(ms[i]);
        return;
    }
    long mmax = 0;
    for (long m : ms) mmax = std::max(mmax, std::abs(m) + 1);
    thread_local NodeTable tab;
    build_nodes(tau, green_alias_free_points(mmax, tau), tab);
    for (std::size_t i = 0; i < ms.size(); ++i) out[i] = trapezoid_from_nodes(ms[i], tau, tab);
}

double green_y_quotient(long n, double tau, double d) {
    check_time(tau, "green_y_quotient");
    if (!std::isfinite(d)) throw DomainError("green_y_quotient: d must be finite");
    if (tau + d <= 0.0) {
        if (d == 0.0) return green_at_zero(n).ydot;
        return -green_y(n, tau) / d;
    }
    const double lo = std::min(tau, tau + d), delta = std::abs(d);
    if (lo == 0.0 && d != 0.0) return (green_y(n, tau + d) - green_y(n, tau)) / d;
    thread_local NodeTable tab;
    const long M = std::max(256L, green_alias_free_points(std::abs(n) + 1, lo + delta));
    build_nodes(lo, M, tab);
    const long nm = std::abs(n) % M;
    const double Md = static_cast<double>(M);
    double acc = 0.0;
    for (std::size_t k = 0; k < tab.j.size(); ++k) {
        const double s = tab.s[k], x = 4.0 * s * s;
        const double cs = std::cos(2.0 * kPi * static_cast<double>((nm * tab.j[k]) % M) / Md);
        // (1 - e^{-x delta}) / (x delta), -> 1 as delta -> 0
        const double phi = delta > 0.0 ? -std::expm1(-x * delta) / (x * delta) : 1.0;
        acc += cs * tab.w[k] * phi;
    }
    return (1.0 + acc) / Md;
}

double eval_ydot_bessel(long n, double t) {
    check_time(t, "eval_ydot_bessel");
    n = std::abs(n);
    if (t == 0.0) return n == 0 ? 1.0 : 0.0;
    if (t <= 1.0) {
        // e^{-2t} sum_m t^{2m+n} / (m! (m+n)!)
        double lead = static_cast<double>(n) * std::log(t) - std::lgamma(static_cast<double>(n) + 1.0) - 2.0 * t;
        if (lead < -745.0) return 0.0;
        double term = 1.0, sum = 0.0;
        for (long m = 0; m < 200; ++m) {
            sum += term;
            term *= t * t / (static_cast<double>(m + 1) * static_cast<double>(m + n + 1));
            if (term < 1e-18 * sum) break;
        }
        return std::exp(lead) * sum;
    }
    const double x = 2.0 * t;
    const long K = n + static_cast<long>(std::ceil(std::sqrt(100.0 * x))) + 40;
    double vk = 1.0, vkp1 = 0.0, sum = 0.0, ans = 0.0;
    for (long k = K; k >= 1; --k) {
        sum += 2.0 * vk;
        if (k == n) ans = vk;
        double vkm1 = (2.0 * static_cast<double>(k) / x) * vk + vkp1;
        vkp1 = vk;
        vk = vkm1;
        if (vk > 1e250) {
            vk *= 1e-250;
            vkp1 *= 1e-250;
            sum *= 1e-250;
            ans *= 1e-250;
        }
    }
    sum += vk;
    if (n == 0) ans = vk;
    return ans / sum;
}

GreenTable green_bessel_table(double t, long mmax) {
    check_time(t, "green_bessel_table");
    if (mmax < 0) throw DomainError("green_bessel_table: mmax must be nonnegative");
    GreenTable tab;
    tab.t = t;
    const long K = mmax + 2 + static_cast<long>(std::ceil(std::sqrt(200.0 * t))) + 40;
    std::vector<double> v(K + 2, 0.0);
    if (t == 0.0) {
        v[0] = 1.0;
    } else {
        const double x = 2.0 * t;
        v[K] = 1.0;
        for (long k = K; k >= 1; --k) {
            v[k - 1] = (2.0 * static_cast<double>(k) / x) * v[k] + v[k + 1];
            if (v[k - 1] > 1e250) {
                for (long i = k - 1; i <= K; ++i) v[i] *= 1e-250;
            }
        }
        double sum = v[0];
        for (long k = 1; k <= K; ++k) sum += 2.0 * v[k];
        for (double& e : v) e /= sum;
    }
    // tail[m] = sum_{i > m} ydot_i, accumulated from the top.
    std::vector<double> tail(K + 2, 0.0), ysum(K + 2, 0.0);
    for (long m = K; m >= 0; --m) tail[m] = tail[m + 1] + v[m + 1];
    for (long m = K; m >= 0; --m) ysum[m] = ysum[m + 1] + tail[m];
    tab.y.resize(mmax + 1);
    tab.ydot.resize(mmax + 1);
    tab.yddot.resize(mmax + 1);
    tab.grad_y.resize(mmax + 1);
    for (long m = 0; m <= mmax; ++m) {
        tab.ydot[m] = v[m];
        tab.y[m] = ysum[m];
        tab.grad_y[m] = -tail[m];
        double left = m == 0 ? v[1] : v[m - 1];
        tab.yddot[m] = left - 2.0 * v[m] + v[m + 1];
    }
    return tab;
}

const char* remainder_name(RemainderId id) {
    switch (id) {
        case RemainderId::r0: return "r0";
        case RemainderId::rtilde1: return "rtilde1";
        case RemainderId::r1: return "r1";
        case RemainderId::r2: return "r2";
        case RemainderId::w0: return "w0";
        case RemainderId::w1: return "w1";
    }
    return "?";
}

double eval_remainder(RemainderId id, long n, double t, double tau0) {
    if (n < 0) throw DomainError("eval_remainder: n must be nonnegative");
    if (!(t >= tau0) || !(tau0 > 0.0)) {
        std::ostringstream os;
        os << "eval_remainder: t = " << t << " below tau0 = " << tau0;
        throw DomainError(os.str());
    }
    GreenEval e = eval_green(n, t, 1e-14);
    const double st = std::sqrt(t);
    const double x = static_cast<double>(n) / st;
    switch (id) {
        case RemainderId::r0: return e.y - st * kernel_f(x);
        case RemainderId::rtilde1: return e.y - st * kernel_f(x) - kernel_ftilde(x) / st;
        case RemainderId::r1: return e.ydot - kernel_h(x) / st;
        case RemainderId::r2: return e.yddot - kernel_h_deriv(2, x) / (t * st);
        case RemainderId::w0: return e.grad_y - kernel_g(x) - kernel_h(x) / (2.0 * st);
        case RemainderId::w1: return e.grad_ydot - kernel_h_deriv(1, x) / t;
    }
    throw DomainError("eval_remainder: unknown id");
}

// ---- cache ----

namespace {

constexpr char kCacheMagic[4] = {'R', 'G', 'C', 'H'};
constexpr std::uint32_t kCacheVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw DomainError("green cache: truncated stream");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

GreenEval GreenCache::get(long n, double t) {
    auto key = std::make_pair(n, std::bit_cast<std::uint64_t>(t));
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = map_.find(key);
        if (it != map_.end()) return it->second;
    }
    GreenEval e = eval_green(n, t, tol_);
    std::lock_guard<std::mutex> lk(mu_);
    return map_.emplace(key, e).first->second;
}

std::size_t GreenCache::size() const {
    std::lock_guard<std::mutex> lk(mu_);
    return map_.size();
}

void GreenCache::dump(std::ostream& os) const {
    std::lock_guard<std::mutex> lk(mu_);
    os.write(kCacheMagic, 4);
    put_u64(os, kCacheVersion);
    put_f64(os, tol_);
    put_u64(os, map_.size());
    for (const auto& [key, e] : map_) {
        put_u64(os, static_cast<std::uint64_t>(e.n));
        put_f64(os, e.t);
        for (double v : {e.y, e.ydot, e.yddot, e.grad_y, e.grad_ydot, e.grad_yddot}) put_f64(os, v);
        put_u64(os, static_cast<std::uint64_t>(e.method));
        put_u64(os, static_cast<std::uint64_t>(e.quad_points));
    }
}

void GreenCache::load(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || !std::equal(magic, magic + 4, kCacheMagic)) throw DomainError("green cache: bad magic");
    if (get_u64(is) != kCacheVersion) throw DomainError("green cache: unsupported version");
    double tol = get_f64(is);
    std::uint64_t count = get_u64(is);
    std::lock_guard<std::mutex> lk(mu_);
    tol_ = tol;
    for (std::uint64_t i = 0; i < count; ++i) {
        GreenEval e;
        e.n = static_cast<long>(get_u64(is));
        e.t = get_f64(is);
        e.y = get_f64(is);
        e.ydot = get_f64(is);
        e.yddot = get_f64(is);
        e.grad_y = get_f64(is);
        e.grad_ydot = get_f64(is);
        e.grad_yddot = get_f64(is);
        e.method = static_cast<GreenMethod>(get_u64(is));
        e.quad_points = static_cast<long>(get_u64(is));
        map_.emplace(std::make_pair(e.n, std::bit_cast<std::uint64_t>(e.t)), e);
    }
}

void GreenCache::dump_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DomainError("green cache: cannot open " + path);
    dump(os);
}

void GreenCache::load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DomainError("green cache: cannot open " + path);
    load(is);
}

}  // namespace rattle
