#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "rattle/params.hpp"
#include "rattle/sim.hpp"

namespace rattle {

// Least-squares slope of ys against xs.
double ls_slope(std::span<const double> xs, std::span<const double> ys);

struct QnEntry {
    long n = 0;
    double q = 0.0;
    double q_over_sqrt_n = 0.0;
};

struct QnSeries {
    double a = 0.0;
    std::vector<QnEntry> entries;  // by n, for every switched node 0..frontier
    long window_lo = 0, window_hi = 0;
    double fitted_E = 0.0;  // max |q_n| / sqrt(n) over the window
};

// Window [lo, hi]; hi < 0 means the last switched node of the frontier.
QnSeries extract_qn(const SwitchHistory& hist, double a, long lo = 10, long hi = -1);

struct GradAsymptotics {
    std::vector<long> n;
    std::vector<double> residual;  // (grad_n + 0.75 h1) sqrt(n)
    double A_fit = 0.0;            // max |residual| over the window
    double log_slope = 0.0;        // slope of log|residual| against log n
    double max_grad = 0.0;         // max grad_n over n >= bound_from
    bool bound_holds = true;       // grad_n <= -3 h1 / 8 for n >= bound_from
};

GradAsymptotics grad_asymptotics(const SwitchHistory& hist, long lo, long hi, long bound_from);

// -c n^2 + (h1 - 2c) a n^2 - h1 sum_{|k| <= n-1} y_{n-k}(a (n^2 - k^2)).
double compute_Cn(long n, double a, const Params& p);

// Quantities of the fixed-point equation at index m for a trial q_m, given
// q_0..q_{m-1} (q_{-k} = q_k).
struct FixedPointTerms {
    long m = 0;
    double q = 0.0;
    double C = 0.0, D = 0.0;
    std::vector<double> J;  // J_{m,k}, k = 0..m-1
    double residual = 0.0;  // C + D q + h1 sum_k J_{m,k} q_k
};

// C may be passed in to avoid recomputation (NaN computes it).
FixedPointTerms fixed_point_terms(const Params& p, double a, long m, double q_m, std::span<const double> q_prev,
                                  double C = std::numeric_limits<double>::quiet_NaN());

struct CandidateState {
    long n = 0;
    std::vector<double> q;  // accepted q_0..q_n
    double Cn = 0.0, Dn = 0.0;
    std::vector<double> Jnk;
};

struct CandidateResult {
    double q_next = 0.0;
    FixedPointTerms terms;  // at the returned root
    double min_J = 0.0;     // smallest J_{n+1,k} seen during the solve
    double min_D = 0.0;     // smallest D_{n+1} seen during the solve
    int iterations = 0;
};

// Root of q - F(q) on [-E sqrt(n+1), E sqrt(n+1)] by bisection. Throws
// ConvergenceError without a sign change.
CandidateResult candidate_step(const Params& p, double a, const CandidateState& state, double E);

// Margins of the rescaled map at step n (needs q_0..q_{n+1}):
// item2 = min_k J_{n,k} - (1 + kappa/n) J_{n+1,k}, item3 = D_n - h1 (1 + kappa/n) J_{n+1,n},
// and the map value F~(q_{n+1}), which equals q_{n+1} at a fixed point.
struct RescaledMap {
    double item2 = 0.0, item3 = 0.0;
    double value = 0.0;
};
RescaledMap rescaled_map(const Params& p, double a, long n, std::span<const double> q, double kappa);

struct PatternStats {
    long N1 = 0, N2 = 0;
    long undecided = 0;
    double ratio = 0.0;  // N2 / N1
    std::vector<long> never;
};

// Nodes 0..j: switched (N1) and declared never switching (N2). A node is declared
// never switching when at the horizon it sits at or below -0.05 h1, is past its
// maximum and is decreasing.
PatternStats pattern_stats(const SwitchHistory& hist, long j);

void write_qn_csv(std::ostream& os, const QnSeries& s);
void write_grad_csv(std::ostream& os, const SwitchHistory& hist, const GradAsymptotics& g);

}  // namespace rattle
