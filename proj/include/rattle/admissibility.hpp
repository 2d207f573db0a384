#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rattle/params.hpp"
#include "rattle/sim.hpp"

namespace rattle {

struct Constant {
    double value = 0.0;
    std::string grid;        // where the value was computed, empty for closed forms
    bool empirical = false;  // true for scan maxima standing in for a supremum
};

// Named constants in insertion order.
class ConstantsTable {
public:
    void set(const std::string& name, double value, std::string grid = {}, bool empirical = false);
    bool has(const std::string& name) const;
    // Throws PreconditionError naming the missing entry.
    double get(const std::string& name) const;
    const Constant& entry(const std::string& name) const;
    const std::vector<std::pair<std::string, Constant>>& entries() const { return entries_; }

    std::vector<std::string> warnings;

    std::string to_json() const;
    static ConstantsTable from_json(const std::string& text);

private:
    std::vector<std::pair<std::string, Constant>> entries_;
};

struct KernelConstants {
    double B_h2 = 0.0, B_h4 = 0.0;
};
KernelConstants kernel_constants();

struct SupEntry {
    double value = 0.0;
    long arg_n = 0;
    double arg_t = 0.0;
    double plateau_change = 0.0;  // relative change on the doubled grid
};

struct GreenSups {
    double tau0 = 1.0;
    long n_max = 64;
    double t_max = 1e4;
    int t_points = 200;
    SupEntry A0, A1, At1, A2, B0, B1, A2s, B2s;
    bool plateau = true;  // every change <= 5%
    bool plateau_checked = false;
    std::string grid() const;
};

// Suprema over n <= n_max and t log-spaced in [tau0, t_max]. With check_plateau the
// grid is doubled (n, t_max and the point count) and the relative changes recorded.
GreenSups green_sup_constants(double tau0, long n_max = 64, double t_max = 1e4, int t_points = 200,
                              bool check_plateau = true);

struct Structural {
    double D_a = 0.0, x_Da = 0.0;
    double p = 0.0, x_p = 0.0;
    long N = 0;
    double D_p1 = 0.0, D_p2 = 0.0, kappa = 0.0;
};
Structural structural_constants(double a);
double kappa_for(double p, long N);

// Normalised lattice sums at a single n.
double sum_S(long n, double alpha);  // sqrt(n) sum (n-k)^alpha / (n^2-k^2)^(alpha+1/2)
double sum_T(long n, double alpha);  // sum n^alpha / (n^2-k^2)^alpha
double sum_R(long n);                // sum 1 / sqrt(n^2-k^2)
double sum_R1(long n, double x0);    // n^2 sum_{|k| < x0 n} (n^2-k^2)^(-3/2)
double sum_inv(long n);              // sum 1 / (n^2-k^2)

struct SumConstants {
    long N = 1, n_scan_max = 3000;
    double S1 = 0, S2 = 0, S3 = 0;
    double T15 = 0, T2 = 0, T25 = 0;
    double R = 0, R1 = 0;
    // Maxima over [N, n_scan_max] and the doubling grid up to 16 n_scan_max; settled
    // when the last doubling moved no sum (R aside, which tends to pi) by over 1e-4.
    bool settled = true;
};
SumConstants sum_constants(long N, long n_scan_max, double x0);

// Residuals integral - sum_{k=-n}^{n-1} F(k/n)/n for n in [N, n_max]. The profile is
// passed as a function of s = 1 - x in (0, 2] so the sum is exact near x = 1.
struct RiemannScan {
    long N = 1;
    std::vector<double> residual;  // index n - N
    std::vector<double> sum;       // the Riemann sums themselves
    long n_at(std::size_t i) const { return N + static_cast<long>(i); }
};
RiemannScan riemann_scan(const std::function<double(double)>& profile_of_s, double integral, long N, long n_max);

// sup n^power |residual|.
double scan_sup(const RiemannScan& s, double power, double shift = 0.0);
// sup sqrt(n) |(n+1)^2 R_{n+1} - n^2 R_n|.
double scan_increment_sup(const RiemannScan& s);
// Two-sided bound L_star/sqrt(n) - l/n <= residual <= L_upper/sqrt(n): L_star and
// the slope from least squares on residual sqrt(n) against 1/sqrt(n), l widened
// until the lower bound holds at every scanned n.
struct Sandwich {
    double L_star = 0.0, l = 0.0, L_upper = 0.0;
};
Sandwich sandwich_fit(const RiemannScan& s);

struct RiemannConstants {
    long N = 1, n_scan_max = 2000;
    double L1 = 0, Lbar1 = 0;                  // profile F
    double L_ft = 0, L_ft_star = 0, l_ft = 0;  // profile F~
    double c1_ft = 0;
    double C_H = 0, l_H = 0, L2_H = 0, c1_H = 0;
    double C_H2 = 0, K_h1 = 0, K_g = 0, K_h = 0;
};
RiemannConstants riemann_error_constants(double a, long N, long n_scan_max);

struct KConstants {
    double K1 = 0, K2 = 0, K3 = 0, K = 0;
    double Kp1 = 0, l1 = 0, Kp = 0;
    double E0 = 0;
};
KConstants K_constants(const Params& p, double a, const GreenSups& g, const Structural& s, const SumConstants& sc,
                       const RiemannConstants& rc);

// h''((1-x)/sqrt(r)) + h''((1+x)/sqrt(r)) with r = a (1 - x^2) + eps1.
double psi(double a, double x, double eps1);
// 0.95 times the distance of max_x psi(a, x, 0) from zero, capped below 1/(4 sqrt(pi)).
double default_eta(double a);

struct AuxParams {
    double theta0 = 0.0, eta = 0.0;
    double x0 = 0.0, eps0 = 0.0;
    double b = 0.0;
    bool certified = false;
};
// eta NaN selects default_eta.
AuxParams aux_params(double a, long N, double K_h, double eta = std::numeric_limits<double>::quiet_NaN());
bool certify_psi(double a, long N, double eta, double x0, double eps0);

struct TableOptions {
    double tau0 = 1.0;
    long green_n_max = 64;
    double green_t_max = 1e4;
    int green_t_points = 200;
    bool plateau_check = true;
    long riemann_scan_max = 2000;
    long sum_scan_max = 3000;
    double eta = std::numeric_limits<double>::quiet_NaN();
};

// Groups A and B. `group_a` may be passed to reuse a computation across a sweep.
ConstantsTable build_constants(const Params& p, double a, const TableOptions& o = {},
                               const GreenSups* group_a = nullptr);

double amin_n(const ConstantsTable& t, double E, long n);
double amax_n(const ConstantsTable& t, double E, long n);
double delta_n(const ConstantsTable& t, double E, long n);
// inf over n >= max(N, 1/(1-x0)) of the one-sided sum, scanned to n_scan_max and
// then on a doubling grid up to 16 n_scan_max.
double compute_R2(const ConstantsTable& t, double E, long n_scan_max = 3000);
// Copy of the table with group C (E, R2) added.
ConstantsTable with_E(const ConstantsTable& t, double E, long n_scan_max = 3000);

struct RequirementValue {
    bool applicable = true;
    bool satisfied = true;
    double lhs = 0.0, rhs = 0.0;
    double margin = 0.0;  // rhs - lhs, NaN when not applicable
};
using RequirementRow = std::array<RequirementValue, 12>;

// The 12 requirements at n. The table must carry group C for this E.
RequirementRow check_requirements(double E, const ConstantsTable& t, long n);

enum class Verdict { admissible, not_admissible, undetermined };
const char* verdict_name(Verdict v);

struct RequirementReport {
    double E = 0.0;
    long N = 1;
    std::vector<RequirementRow> rows;  // n = N + index
    long n0 = -1;                      // -1: not found
    long n_search_max = 0;
    std::array<long, 12> last_failure{};  // 0 when never failing
    bool tail_ok = false;
    Verdict verdict = Verdict::undetermined;
    std::vector<std::string> notes;
};

// Smallest n such that all requirements hold on [n, n_search_max]. The search range
// doubles up to `expansions` times while the last failure sits at its end.
RequirementReport find_n0(double E, const ConstantsTable& t, long n_search_max = 4000, int expansions = 2);

struct AdmissibilityResult {
    Verdict verdict = Verdict::undetermined;
    bool clause1 = false, clause2 = false, clause3 = false;
    double max_q_ratio = 0.0;  // max_{k<=n0} |q_k| / (E sqrt(n0))
    double grad_n0 = 0.0;
    std::vector<std::string> violated;
};

AdmissibilityResult admissibility_verdict(double E, long n0, const SwitchHistory& hist, double slack = 1e-10);

// Folds the requirement report, plateau flag and clauses into one verdict.
Verdict final_verdict(const RequirementReport& r, const AdmissibilityResult& a, bool plateau);

// Rows n, columns req1..req12 holding margins.
void write_margin_csv(std::ostream& os, const RequirementReport& r, long stride = 1);

}  // namespace rattle
