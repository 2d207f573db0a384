#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "rattle/cli.hpp"
#include "rattle/errors.hpp"
#include "rattle/rate.hpp"

using namespace rattle;
namespace fs = std::filesystem;

namespace {

struct Out {
    int code;
    std::string out, err;
};

Out call(std::vector<std::string> args) {
    args.insert(args.begin(), "rattle");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream o, e;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), o, e);
    return {code, o.str(), e.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("rattle_cli_" + name);
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST(Cli, ParseRange) {
    const std::vector<double> v = parse_range("1.1:2.5:0.1");
    ASSERT_EQ(v.size(), 15u);
    EXPECT_DOUBLE_EQ(v.front(), 1.1);
    EXPECT_EQ(v[1], 1.2);
    EXPECT_EQ(v.back(), 2.5);
    EXPECT_EQ(parse_range("1.5,2"), (std::vector<double>{1.5, 2.0}));
    EXPECT_EQ(parse_range("2"), (std::vector<double>{2.0}));
    EXPECT_THROW(parse_range("1:2"), PreconditionError);
    EXPECT_THROW(parse_range("1:2:0"), PreconditionError);
    EXPECT_THROW(parse_range("x"), PreconditionError);
}

TEST(Cli, Sha1) {
    EXPECT_EQ(sha1_hex("abc"), "a9993e364706816aba3e25717850c26c9cd0d89d");
    EXPECT_EQ(sha1_hex(""), "da39a3ee5e6b4b0d3255bfef95601890afd80709");
}

TEST(Cli, ConfigFileUnderFlags) {
    const fs::path d = scratch("cfg");
    fs::create_directories(d);
    {
        std::ofstream f(d / "run.cfg");
        f << "# comment\nc=0.25\nh1=1.5\nn-max=42\nthreads=3\n";
    }
    const std::string cfg = (d / "run.cfg").string();
    std::vector<const char*> argv{"rattle", "simulate", "--config", cfg.c_str(), "--h1", "2.5"};
    RunConfig c = parse_config(static_cast<int>(argv.size()), argv.data());
    EXPECT_EQ(c.command, "simulate");
    EXPECT_EQ(c.params.c, 0.25);
    EXPECT_EQ(c.params.h1, 2.5);
    EXPECT_EQ(c.n_max, 42);
    EXPECT_EQ(c.threads, 3);
}

TEST(Cli, PreconditionExitCode) {
    Out r = call({"solve-a", "--c", "0.5", "--h1", "1.0", "--out", scratch("bad").string()});
    EXPECT_EQ(r.code, 2);
    const auto j = nlohmann::json::parse(r.err);
    EXPECT_EQ(j["exit_code"], 2);
    EXPECT_EQ(j["kind"], "precondition");
    EXPECT_EQ(call({"frobnicate"}).code, 2);
    EXPECT_EQ(call({"simulate", "--bogus", "1"}).code, 2);
    EXPECT_EQ(call({"simulate", "--h1", "1.5:2:0.1"}).code, 2);
    EXPECT_EQ(call({"--help"}).code, 0);
}

TEST(Cli, SolveARowAndManifest) {
    const fs::path d = scratch("solve");
    Out r = call({"solve-a", "--c", "0.5", "--h1", "2.0", "--out", d.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(d / "solve_a.csv");
    EXPECT_EQ(csv.substr(0, csv.find("\r\n")), "c,h1,a,residual_h,residual_f,residual_g,iterations");
    std::istringstream row(csv.substr(csv.find("\r\n") + 2));
    std::string c, h1, a;
    std::getline(row, c, ',');
    std::getline(row, h1, ',');
    std::getline(row, a, ',');
    EXPECT_EQ(std::stod(a), solve_a(Params{0.5, 2.0, 0.0, 1.0}).a);
    const auto m = nlohmann::json::parse(slurp(d / "solve_a.csv.manifest.json"));
    EXPECT_EQ(m["sha1"], sha1_hex(csv));
    EXPECT_EQ(m["inputs"]["params"]["h1"], 2.0);
    EXPECT_TRUE(m.contains("timestamp"));
    EXPECT_TRUE(m.contains("code_version"));
}

TEST(Cli, RerunsAreIdenticalModuloTimestamp) {
    const fs::path d1 = scratch("rerun1"), d2 = scratch("rerun2");
    Out a = call({"simulate", "--h1", "1.5", "--n-max", "30", "--out", d1.string()});
    Out b = call({"simulate", "--h1", "1.5", "--n-max", "30", "--out", d2.string()});
    ASSERT_EQ(a.code, 0);
    ASSERT_EQ(b.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(slurp(d1 / "history.csv"), slurp(d2 / "history.csv"));
    auto m1 = nlohmann::json::parse(slurp(d1 / "history.csv.manifest.json"));
    auto m2 = nlohmann::json::parse(slurp(d2 / "history.csv.manifest.json"));
    m1.erase("timestamp");
    m2.erase("timestamp");
    m1["inputs"].erase("out");
    m2["inputs"].erase("out");
    EXPECT_EQ(m1, m2);
}

TEST(Cli, TablesAndRattling) {
    const fs::path d = scratch("tables");
    ASSERT_EQ(call({"qn-table", "--h1", "1.5", "--n-max", "40", "--out", d.string()}).code, 0);
    ASSERT_EQ(call({"grad-table", "--h1", "1.5", "--n-max", "40", "--out", d.string()}).code, 0);
    EXPECT_TRUE(fs::exists(d / "qn.csv.manifest.json"));
    EXPECT_TRUE(fs::exists(d / "grad.csv.manifest.json"));
    Out r = call({"simulate", "--h2", "2.0", "--n-max", "1000", "--t-max", "300", "--pattern-nodes", "12", "--out",
                  d.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto s = nlohmann::json::parse(r.out);
    EXPECT_EQ(s["pattern"]["N1"], 7);
}

TEST(Cli, RequirementsAndOracles) {
    const fs::path d = scratch("req");
    Out r = call({"requirements", "--h1", "2.0", "--margin-stride", "100", "--out", d.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto s = nlohmann::json::parse(r.out);
    EXPECT_GE(s["report"]["n0"].get<long>(), 1);
    const std::string csv = slurp(d / "margins.csv");
    EXPECT_EQ(csv.substr(0, csv.find("\r\n")), "n,req1,req2,req3,req4,req5,req6,req7,req8,req9,req10,req11,req12");
    Out o = call({"oracle-check", "--h1", "1.5", "--out", d.string()});
    EXPECT_EQ(o.code, 0) << o.err;
    Out e = call({"requirements", "--h1", "2.0", "--E", "0.5", "--out", d.string()});
    EXPECT_EQ(e.code, 2);
}

TEST(Cli, SweepRowOrderIndependentOfThreads) {
    const fs::path d1 = scratch("sweep1"), d2 = scratch("sweep2");
    const std::vector<std::string> base{"sweep", "--h1", "1.8,2.0,2.2", "--e-steps", "2", "--green-t-points", "60",
                                        "--plateau-check", "0"};
    auto with = [&](const fs::path& d, const std::string& threads) {
        std::vector<std::string> v = base;
        v.insert(v.end(), {"--threads", threads, "--out", d.string()});
        return call(v);
    };
    ASSERT_EQ(with(d1, "1").code, 0);
    ASSERT_EQ(with(d2, "3").code, 0);
    const std::string s1 = slurp(d1 / "sweep.csv");
    EXPECT_EQ(s1, slurp(d2 / "sweep.csv"));
    EXPECT_EQ(s1.substr(0, s1.find("\r\n")), "h1,a,E0,E,n0,tail_ok,verdict");
    EXPECT_NE(s1.find("\r\n1.8,"), std::string::npos);
    EXPECT_LT(s1.find("\r\n1.8,"), s1.find("\r\n2.2"));
}
