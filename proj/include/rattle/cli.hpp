#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "rattle/admissibility.hpp"
#include "rattle/params.hpp"

namespace rattle {

struct RunConfig {
    std::string command;
    Params params;
    long n_max = 100;
    double t_max = std::numeric_limits<double>::infinity();
    long n_lo = 10, n_hi = -1;
    long pattern_nodes = 200;
    double E = std::numeric_limits<double>::quiet_NaN();  // NaN: sweep E0 1.05^j
    int e_steps = 8;
    long n_search_max = 4000;
    int expansions = 4;
    long margin_stride = 1;
    std::vector<double> h1_list;  // sweep; other commands take one value
    bool verify = false;
    long sim_max_n = 5000;
    double rate_tol = 1e-12;
    TableOptions table;
    std::string out_dir = "out";
    int threads = 1;
};

inline const char* const kCommands[] = {"solve-a",      "simulate",      "qn-table", "grad-table",  "constants",
                                        "requirements", "admissibility", "sweep",    "oracle-check"};

struct HelpRequested {
    std::string text;
};

// Flags override values from --config (key=value lines). Throws PreconditionError, or
// HelpRequested for --help.
RunConfig parse_config(int argc, const char* const* argv);

// "lo:hi:step" (inclusive) or a comma list.
std::vector<double> parse_range(const std::string& spec);

std::string sha1_hex(const std::string& bytes);

// Exit status: 0 success (admissible for the admissibility command), 1 a verdict
// other than admissible, 2 precondition violation, 3 numerical failure.
int run(const RunConfig& cfg, std::ostream& out);

// parse_config + run, printing error JSON to `err` on failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rattle
