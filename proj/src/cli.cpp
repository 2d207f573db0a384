#include "rattle/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rattle/analysis.hpp"
#include "rattle/csv.hpp"
#include "rattle/errors.hpp"
#include "rattle/green.hpp"
#include "rattle/parallel.hpp"
#include "rattle/rate.hpp"
#include "rattle/sim.hpp"

#ifndef RATTLE_VERSION
#define RATTLE_VERSION "unknown"
#endif

namespace rattle {

using ojson = nlohmann::ordered_json;

namespace {

ojson num(double v) {
    if (std::isfinite(v)) return v;
    return fmt_num(v);
}

ojson params_json(const Params& p) { return {{"c", p.c}, {"h1", p.h1}, {"h2", p.h2}, {"tau0", p.tau0}}; }

ojson config_json(const RunConfig& c) {
    ojson j;
    j["command"] = c.command;
    j["params"] = params_json(c.params);
    j["h1_list"] = c.h1_list;
    j["n_max"] = c.n_max;
    j["t_max"] = num(c.t_max);
    j["n_lo"] = c.n_lo;
    j["n_hi"] = c.n_hi;
    j["pattern_nodes"] = c.pattern_nodes;
    j["E"] = num(c.E);
    j["e_steps"] = c.e_steps;
    j["n_search_max"] = c.n_search_max;
    j["expansions"] = c.expansions;
    j["margin_stride"] = c.margin_stride;
    j["verify"] = c.verify;
    j["sim_max_n"] = c.sim_max_n;
    j["rate_tol"] = c.rate_tol;
    j["green_n_max"] = c.table.green_n_max;
    j["green_t_max"] = c.table.green_t_max;
    j["green_t_points"] = c.table.green_t_points;
    j["plateau_check"] = c.table.plateau_check;
    j["riemann_scan_max"] = c.table.riemann_scan_max;
    j["sum_scan_max"] = c.table.sum_scan_max;
    j["eta"] = num(c.table.eta);
    return j;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Writes the artifact and <name>.manifest.json beside it.
void emit(const RunConfig& cfg, const std::string& name, const std::string& content) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const fs::path path = fs::path(cfg.out_dir) / name;
    {
        std::ofstream f(path, std::ios::binary);
        f << content;
        if (!f) throw std::runtime_error("cannot write " + path.string());
    }
    ojson m;
    m["artifact"] = name;
    m["sha1"] = sha1_hex(content);
    m["bytes"] = content.size();
    m["code_version"] = RATTLE_VERSION;
    m["inputs"] = config_json(cfg);
    m["timestamp"] = utc_now();
    std::ofstream f(fs::path(cfg.out_dir) / (name + ".manifest.json"), std::ios::binary);
    f << m.dump(2) << '\n';
    if (!f) throw std::runtime_error("cannot write manifest for " + name);
}

double rate_of(const RunConfig& cfg, const Params& p) { return solve_a(p, cfg.rate_tol).a; }

SimOptions sim_opts(const RunConfig& cfg) {
    SimOptions o;
    o.t_max = cfg.t_max;
    return o;
}

std::vector<double> e_grid(const RunConfig& cfg, double E0) {
    if (!std::isnan(cfg.E)) return {cfg.E};
    std::vector<double> es;
    for (int j = 0; j < cfg.e_steps; ++j) es.push_back(E0 * std::pow(1.05, j));
    return es;
}

std::string verdict_field(const std::optional<Verdict>& v) { return v ? verdict_name(*v) : "unverified"; }

// ---- commands

int cmd_solve_a(const RunConfig& cfg, ojson& s) {
    const RateSolution r = solve_a(cfg.params, cfg.rate_tol);
    std::ostringstream os;
    CsvWriter w(os);
    w.row({"c", "h1", "a", "residual_h", "residual_f", "residual_g", "iterations"});
    w.row({fmt_num(cfg.params.c), fmt_num(cfg.params.h1), fmt_num(r.a), fmt_num(r.residual_h), fmt_num(r.residual_f),
           fmt_num(r.residual_g), std::to_string(r.iterations)});
    emit(cfg, "solve_a.csv", os.str());
    s["a"] = r.a;
    s["residual_h"] = r.residual_h;
    s["residual_f"] = r.residual_f;
    s["residual_g"] = r.residual_g;
    return 0;
}

int cmd_simulate(const RunConfig& cfg, ojson& s) {
    const double a = rate_of(cfg, cfg.params);
    const SwitchHistory h = simulate(cfg.params, a, cfg.n_max, sim_opts(cfg));
    std::ostringstream os;
    write_history_csv(os, h);
    emit(cfg, "history.csv", os.str());
    s["a"] = a;
    s["frontier"] = h.frontier();
    s["max_switched"] = h.max_switched();
    s["complete_to"] = num(h.complete_to);
    if (cfg.params.h2 > 0.0) {
        const long j = std::min(cfg.pattern_nodes - 1, h.max_switched());
        const PatternStats ps = pattern_stats(h, j);
        s["pattern"] = {{"nodes", j + 1}, {"N1", ps.N1}, {"N2", ps.N2}, {"undecided", ps.undecided}, {"ratio", num(ps.ratio)}};
    }
    s["notes"] = h.notes;
    return 0;
}

int cmd_qn_table(const RunConfig& cfg, ojson& s) {
    const double a = rate_of(cfg, cfg.params);
    const SwitchHistory h = simulate(cfg.params, a, cfg.n_max, sim_opts(cfg));
    const QnSeries q = extract_qn(h, a, cfg.n_lo, cfg.n_hi);
    std::ostringstream os;
    write_qn_csv(os, q);
    emit(cfg, "qn.csv", os.str());
    s["a"] = a;
    s["window"] = {q.window_lo, q.window_hi};
    s["fitted_E"] = q.fitted_E;
    return 0;
}

int cmd_grad_table(const RunConfig& cfg, ojson& s) {
    const double a = rate_of(cfg, cfg.params);
    const SwitchHistory h = simulate(cfg.params, a, cfg.n_max, sim_opts(cfg));
    const long hi = cfg.n_hi < 0 ? h.frontier() : cfg.n_hi;
    const GradAsymptotics g = grad_asymptotics(h, cfg.n_lo, hi, cfg.n_lo);
    std::ostringstream os;
    write_grad_csv(os, h, g);
    emit(cfg, "grad.csv", os.str());
    s["a"] = a;
    s["A_fit"] = g.A_fit;
    s["log_slope"] = g.log_slope;
    s["max_grad"] = g.max_grad;
    s["bound_holds"] = g.bound_holds;
    return 0;
}

int cmd_constants(const RunConfig& cfg, ojson& s) {
    const double a = rate_of(cfg, cfg.params);
    ConstantsTable t = build_constants(cfg.params, a, cfg.table);
    if (!std::isnan(cfg.E)) t = with_E(t, cfg.E);
    emit(cfg, "constants.json", t.to_json() + "\n");
    s["a"] = a;
    s["E0"] = t.get("E0");
    s["N"] = t.get("N");
    s["warnings"] = t.warnings;
    return 0;
}

ojson report_json(const RequirementReport& r) {
    ojson j;
    j["E"] = r.E;
    j["n0"] = r.n0;
    j["n_search_max"] = r.n_search_max;
    j["last_failure"] = r.last_failure;
    j["tail_ok"] = r.tail_ok;
    j["notes"] = r.notes;
    return j;
}

int cmd_requirements(const RunConfig& cfg, ojson& s) {
    const double a = rate_of(cfg, cfg.params);
    const ConstantsTable t = build_constants(cfg.params, a, cfg.table);
    const double E = std::isnan(cfg.E) ? 1.1 * t.get("E0") : cfg.E;
    const RequirementReport r = find_n0(E, t, cfg.n_search_max, cfg.expansions);
    std::ostringstream os;
    write_margin_csv(os, r, cfg.margin_stride);
    emit(cfg, "margins.csv", os.str());
    s["a"] = a;
    s["E0"] = t.get("E0");
    s["report"] = report_json(r);
    if (r.n0 < 0) throw ConvergenceError("requirements: n0 not found up to " + std::to_string(r.n_search_max));
    return 0;
}

struct EResult {
    double E = 0.0;
    RequirementReport rep;
    std::optional<AdmissibilityResult> adm;
    std::optional<Verdict> verdict;
};

// find_n0 over the E grid, then one simulation to the largest n0 + 1 (capped at
// sim_max_n) for the clause checks.
std::vector<EResult> evaluate_E_grid(const RunConfig& cfg, const Params& p, double a, const ConstantsTable& t,
                                     bool verify, int threads) {
    const std::vector<double> es = e_grid(cfg, t.get("E0"));
    std::vector<EResult> out(es.size());
    parallel_for(es.size(), threads, [&](std::size_t i) {
        out[i].E = es[i];
        out[i].rep = find_n0(es[i], t, cfg.n_search_max, cfg.expansions);
    });
    if (!verify) return out;
    long need = 0;
    for (const auto& e : out)
        if (e.rep.n0 > 0 && e.rep.n0 + 1 <= cfg.sim_max_n) need = std::max(need, e.rep.n0 + 1);
    if (need == 0) return out;
    const SwitchHistory h = simulate(p, a, need);
    const bool plateau = t.warnings.end() == std::find_if(t.warnings.begin(), t.warnings.end(), [](const std::string& w) {
                             return w.rfind("plateau", 0) == 0;
                         });
    for (auto& e : out) {
        if (e.rep.n0 < 0 || e.rep.n0 + 1 > need) continue;
        e.adm = admissibility_verdict(e.E, e.rep.n0, h);
        e.verdict = final_verdict(e.rep, *e.adm, plateau);
    }
    return out;
}

int cmd_admissibility(const RunConfig& cfg, ojson& s) {
    const double a = rate_of(cfg, cfg.params);
    const ConstantsTable t = build_constants(cfg.params, a, cfg.table);
    const std::vector<EResult> rs = evaluate_E_grid(cfg, cfg.params, a, t, true, cfg.threads);
    std::ostringstream os;
    CsvWriter w(os);
    w.row({"E", "n0", "tail_ok", "clause1", "clause2", "clause3", "max_q_ratio", "grad_n0", "verdict"});
    ojson rows = ojson::array();
    std::optional<double> best;
    for (const auto& e : rs) {
        auto b = [](bool v) { return std::string(v ? "1" : "0"); };
        const bool has = e.adm.has_value();
        w.row({fmt_num(e.E), std::to_string(e.rep.n0), b(e.rep.tail_ok), has ? b(e.adm->clause1) : "",
               has ? b(e.adm->clause2) : "", has ? b(e.adm->clause3) : "", has ? fmt_num(e.adm->max_q_ratio) : "",
               has ? fmt_num(e.adm->grad_n0) : "", verdict_field(e.verdict)});
        ojson r = report_json(e.rep);
        r["verdict"] = verdict_field(e.verdict);
        if (has) r["violated"] = e.adm->violated;
        rows.push_back(r);
        if (e.verdict == Verdict::admissible && !best) best = e.E;
    }
    emit(cfg, "admissibility.csv", os.str());
    s["a"] = a;
    s["E0"] = t.get("E0");
    s["warnings"] = t.warnings;
    s["results"] = rows;
    s["verdict"] = best ? "admissible" : "not-admissible or undetermined";
    if (best) s["smallest_admissible_E"] = *best;
    return best ? 0 : 1;
}

int cmd_sweep(const RunConfig& cfg, ojson& s) {
    const std::vector<double>& hs = cfg.h1_list;
    const GreenSups g = green_sup_constants(cfg.table.tau0, cfg.table.green_n_max, cfg.table.green_t_max,
                                            cfg.table.green_t_points, cfg.table.plateau_check);
    struct Row {
        double h1 = 0, a = 0, E0 = 0, E = std::numeric_limits<double>::quiet_NaN();
        long n0 = -1;
        bool tail_ok = false;
        std::optional<Verdict> verdict;
        std::vector<std::string> warnings;
    };
    std::vector<Row> rows(hs.size());
    parallel_for(hs.size(), cfg.threads, [&](std::size_t i) {
        Params p = cfg.params;
        p.h1 = hs[i];
        Row& r = rows[i];
        r.h1 = hs[i];
        r.a = rate_of(cfg, p);
        const ConstantsTable t = build_constants(p, r.a, cfg.table, &g);
        r.E0 = t.get("E0");
        r.warnings = t.warnings;
        const std::vector<EResult> es = evaluate_E_grid(cfg, p, r.a, t, cfg.verify, 1);
        // smallest admissible E when verifying, else smallest E with a finite n0
        for (const auto& e : es) {
            const bool take = cfg.verify ? e.verdict == Verdict::admissible : e.rep.n0 > 0;
            if (!take) continue;
            r.E = e.E;
            r.n0 = e.rep.n0;
            r.tail_ok = e.rep.tail_ok;
            r.verdict = e.verdict;
            break;
        }
    });
    std::ostringstream os;
    CsvWriter w(os);
    w.row({"h1", "a", "E0", "E", "n0", "tail_ok", "verdict"});
    ojson js = ojson::array();
    for (const auto& r : rows) {
        w.row({fmt_num(r.h1), fmt_num(r.a), fmt_num(r.E0), fmt_num(r.E), std::to_string(r.n0), r.tail_ok ? "1" : "0",
               verdict_field(r.verdict)});
        js.push_back({{"h1", r.h1}, {"n0", r.n0}, {"warnings", r.warnings}});
    }
    emit(cfg, "sweep.csv", os.str());
    s["rows"] = js;
    return 0;
}

int cmd_oracle_check(const RunConfig& cfg, ojson& s) {
    struct Check {
        std::string name;
        double value, tol;
    };
    std::vector<Check> cs;
    const RateSolution r1 = solve_a(cfg.params, cfg.rate_tol), r2 = solve_a_from_f(cfg.params, cfg.rate_tol);
    cs.push_back({"rate: |a(I_H) - a(I_F)| / a", std::abs(r1.a - r2.a) / r1.a, 1e-9});
    double gmax = 0.0;
    for (double t : {0.1, 1.0, 10.0, 100.0, 200.0})
        for (long n = 0; n <= 50; ++n) gmax = std::max(gmax, std::abs(eval_green(n, t).ydot - eval_ydot_bessel(n, t)));
    cs.push_back({"green: max |ydot fourier - ydot bessel|", gmax, 1e-10});
    const long k = 8;
    const SwitchHistory h = simulate(cfg.params, r1.a, k);
    OdeOptions o;
    o.radius = std::max<long>(40, 3 * k);
    o.dt = 1e-3;
    o.stop_after = k;
    o.t_end = 1.01 * h.time_of(k) + 1.0;
    const OdeResult od = ode_oracle(cfg.params, r1.a, o);
    double rel = od.hist.frontier() >= k ? 0.0 : std::numeric_limits<double>::infinity();
    for (long n = 1; n <= std::min(k, od.hist.frontier()); ++n)
        rel = std::max(rel, std::abs(od.hist.time_of(n) / h.time_of(n) - 1.0));
    cs.push_back({"sim: max relative gap in t_1..t_8, event-driven vs ODE", rel, 1e-4});
    std::ostringstream os;
    CsvWriter w(os);
    w.row({"check", "value", "tolerance", "pass"});
    bool all = true;
    ojson js = ojson::array();
    for (const auto& c : cs) {
        const bool pass = c.value <= c.tol;
        all &= pass;
        w.row({c.name, fmt_num(c.value), fmt_num(c.tol), pass ? "1" : "0"});
        js.push_back({{"check", c.name}, {"value", num(c.value)}, {"pass", pass}});
    }
    emit(cfg, "oracle.csv", os.str());
    s["checks"] = js;
    if (!all) throw ConvergenceError("oracle-check: an independent route disagrees");
    return 0;
}

}  // namespace

std::vector<double> parse_range(const std::string& spec) {
    auto to_d = [&](const std::string& x) {
        std::size_t used = 0;
        double v;
        try {
            v = std::stod(x, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != x.size()) throw PreconditionError("bad number '" + x + "' in '" + spec + "'");
        return v;
    };
    std::vector<std::string> parts;
    const char sep = spec.find(':') != std::string::npos ? ':' : ',';
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, sep);) parts.push_back(item);
    if (sep == ',') {
        std::vector<double> v;
        for (const auto& p : parts) v.push_back(to_d(p));
        if (v.empty()) throw PreconditionError("empty list");
        return v;
    }
    if (parts.size() != 3) throw PreconditionError("range must be lo:hi:step, got '" + spec + "'");
    const double lo = to_d(parts[0]), hi = to_d(parts[1]), step = to_d(parts[2]);
    if (!(step > 0.0) || !(hi >= lo)) throw PreconditionError("range needs step > 0 and hi >= lo: '" + spec + "'");
    const long count = std::lround(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> v;
    // rounded to 12 significant digits so 1.1:2.5:0.1 yields 1.2, not 1.2000000000000002
    char buf[32];
    for (long i = 0; i < count; ++i) {
        std::snprintf(buf, sizeof buf, "%.12g", lo + static_cast<double>(i) * step);
        v.push_back(std::stod(buf));
    }
    return v;
}

std::string sha1_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha1(), nullptr) != 1)
        throw std::runtime_error("sha1 failed");
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

RunConfig parse_config(int argc, const char* const* argv) {
    RunConfig c;
    CLI::App app{"lattice relay front: switching moments, constants and admissibility"};
    std::string h1 = "2.0", E, t_max, eta;
    app.add_option("command", c.command, "solve-a | simulate | qn-table | grad-table | constants | requirements | "
                                         "admissibility | sweep | oracle-check")
        ->required();
    app.add_option("--c", c.params.c, "initial profile coefficient");
    app.add_option("--h1", h1, "relay output before switching; a range lo:hi:step for sweep");
    app.add_option("--h2", c.params.h2, "relay output magnitude after switching");
    app.add_option("--tau0", c.params.tau0, "lower time cutoff of the Green constants");
    app.add_option("--n-max", c.n_max, "last node to simulate");
    app.add_option("--t-max", t_max, "simulation horizon");
    app.add_option("--n-lo", c.n_lo, "first node of the q_n / gradient window");
    app.add_option("--n-hi", c.n_hi, "last node of the window (-1: frontier)");
    app.add_option("--pattern-nodes", c.pattern_nodes, "nodes counted for the rattling pattern");
    app.add_option("--E", E, "bound constant; default sweeps E0 1.05^j");
    app.add_option("--e-steps", c.e_steps, "number of E values in the sweep");
    app.add_option("--n-search-max", c.n_search_max, "initial n range of the requirement search");
    app.add_option("--expansions", c.expansions, "doublings of the search range while n0 is not found");
    app.add_option("--margin-stride", c.margin_stride, "row stride of margins.csv");
    app.add_flag("--verify", c.verify, "sweep: run the clause checks on a simulation");
    app.add_option("--sim-max-n", c.sim_max_n, "largest simulation used for clause checks");
    app.add_option("--rate-tol", c.rate_tol, "tolerance of the rate equation");
    app.add_option("--green-n-max", c.table.green_n_max, "n range of the Green suprema");
    app.add_option("--green-t-max", c.table.green_t_max, "t range of the Green suprema");
    app.add_option("--green-t-points", c.table.green_t_points, "log-spaced t points of the Green suprema");
    app.add_option("--plateau-check", c.table.plateau_check, "recompute the Green suprema on a doubled grid");
    app.add_option("--riemann-scan-max", c.table.riemann_scan_max, "last n of the Riemann residual scans");
    app.add_option("--sum-scan-max", c.table.sum_scan_max, "last n of the lattice sum scans");
    app.add_option("--eta", eta, "margin of the psi bound; default from the kernel");
    app.add_option("--out", c.out_dir, "output directory");
    app.add_option("--threads", c.threads, "worker threads")->check(CLI::Range(1, 1024));
    app.set_config("--config", "", "key=value file; flags win");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested{app.help()};
    } catch (const CLI::ParseError& e) {
        throw PreconditionError(std::string("command line: ") + e.what());
    }
    if (std::find(std::begin(kCommands), std::end(kCommands), c.command) == std::end(kCommands))
        throw PreconditionError("unknown command '" + c.command + "'");
    auto opt_num = [](const std::string& s, double dflt) {
        if (s.empty()) return dflt;
        const std::vector<double> v = parse_range(s);
        if (v.size() != 1) throw PreconditionError("expected a single number, got '" + s + "'");
        return v[0];
    };
    c.E = opt_num(E, c.E);
    c.t_max = opt_num(t_max, c.t_max);
    c.table.eta = opt_num(eta, c.table.eta);
    c.table.tau0 = c.params.tau0;
    c.h1_list = parse_range(h1);
    if (c.command != "sweep" && c.h1_list.size() != 1)
        throw PreconditionError("--h1 takes a range only for sweep");
    c.params.h1 = c.h1_list.front();
    for (double v : c.h1_list) {
        Params p = c.params;
        p.h1 = v;
        validate(p);
    }
    if (!std::isnan(c.E) && !(c.E > 0.0)) throw PreconditionError("--E must be positive");
    if (c.n_max < 1) throw PreconditionError("--n-max must be >= 1");
    if (c.expansions < 0) throw PreconditionError("--expansions must be >= 0");
    if (c.e_steps < 1) throw PreconditionError("--e-steps must be >= 1");
    return c;
}

int run(const RunConfig& cfg, std::ostream& out) {
    ojson s;
    s["command"] = cfg.command;
    s["params"] = params_json(cfg.params);
    int code = 0;
    try {
        if (cfg.command == "solve-a") code = cmd_solve_a(cfg, s);
        else if (cfg.command == "simulate") code = cmd_simulate(cfg, s);
        else if (cfg.command == "qn-table") code = cmd_qn_table(cfg, s);
        else if (cfg.command == "grad-table") code = cmd_grad_table(cfg, s);
        else if (cfg.command == "constants") code = cmd_constants(cfg, s);
        else if (cfg.command == "requirements") code = cmd_requirements(cfg, s);
        else if (cfg.command == "admissibility") code = cmd_admissibility(cfg, s);
        else if (cfg.command == "sweep") code = cmd_sweep(cfg, s);
        else if (cfg.command == "oracle-check") code = cmd_oracle_check(cfg, s);
        else throw PreconditionError("unknown command '" + cfg.command + "'");
    } catch (...) {
        out << s.dump(2) << '\n';
        throw;
    }
    s["exit_code"] = code;
    out << s.dump(2) << '\n';
    return code;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    auto fail = [&](int code, const char* kind, const std::string& msg) {
        ojson e{{"status", "error"}, {"exit_code", code}, {"kind", kind}, {"message", msg}};
        err << e.dump() << '\n';
        return code;
    };
    try {
        return run(parse_config(argc, argv), out);
    } catch (const HelpRequested& h) {
        out << h.text;
        return 0;
    } catch (const PreconditionError& e) {
        return fail(2, "precondition", e.what());
    } catch (const DomainError& e) {
        return fail(2, "domain", e.what());
    } catch (const ConvergenceError& e) {
        return fail(3, "numerical", e.what());
    } catch (const std::exception& e) {
        return fail(3, "numerical", e.what());
    }
}

}  // namespace rattle
