#include "catch2/catch_amalgamated.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "factorkit/panel_io.hpp"
#include "factorkit/run_config.hpp"

using namespace factorkit;
using Catch::Matchers::ContainsSubstring;

namespace fs = std::filesystem;

// End-to-end checks of the command-line binary named by FACTORKIT_BIN:
// exit codes, diagnostic files, report shapes, and byte determinism
// across reruns and thread counts.

namespace {

std::string bin_path() {
    const char* env = std::getenv("FACTORKIT_BIN");
    REQUIRE(env != nullptr);
    return env;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "factorkit_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = bin_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

int count_lines(const std::string& s) {
    int n = 0;
    for (char c : s) n += c == '\n' ? 1 : 0;
    return n;
}

std::string drop_line(const std::string& text, int line_no) {
    std::istringstream in(text);
    std::string line, out;
    int n = 0;
    while (std::getline(in, line)) {
        if (++n != line_no) {
            out += line;
            out += '\n';
        }
    }
    return out;
}

std::string nth_line(const std::string& text, int line_no) {
    std::istringstream in(text);
    std::string line;
    for (int n = 0; n < line_no && std::getline(in, line); ++n) {
    }
    return line;
}

// Synthetic market covering the default schemes, plus a run config whose
// paths point at it.
fs::path market_inputs(const std::string& name) {
    const fs::path dir = fresh_dir(name);
    spit(dir / "synth.cfg",
         "synth.mode = ff3\n"
         "synth.n_securities = 60\n"
         "synth.months = 240\n"
         "synth.seed = 9\n"
         "synth.start_year = 2000\n"
         "synth.idio_lo = 0.01\n"
         "synth.idio_hi = 0.04\n");
    REQUIRE(run_cli("synth --config " + (dir / "synth.cfg").string() + " --out " +
                    (dir / "in").string()) == 0);
    spit(dir / "run.cfg", "returns = " + (dir / "in/returns.csv").string() + "\n" +
                              "fundamentals = " + (dir / "in/fundamentals.csv").string() + "\n" +
                              "riskfree = " + (dir / "in/riskfree.csv").string() + "\n" +
                              "market = " + (dir / "in/market.csv").string() + "\n");
    return dir;
}

std::string run_args(const fs::path& dir, const std::string& cmd, const std::string& out,
                     const std::string& extra = "") {
    return cmd + " --config " + (dir / "run.cfg").string() + " --out " + (dir / out).string() +
           (extra.empty() ? "" : " " + extra);
}

void require_same_dir(const fs::path& a, const fs::path& b) {
    std::vector<std::string> na, nb;
    for (const auto& e : fs::directory_iterator(a)) na.push_back(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(b)) nb.push_back(e.path().filename().string());
    std::sort(na.begin(), na.end());
    std::sort(nb.begin(), nb.end());
    REQUIRE(na == nb);
    for (const auto& name : na) REQUIRE(slurp(a / name) == slurp(b / name));
}

}  // namespace

TEST_CASE("a clean synthetic market validates with an empty diagnostics file") {
    const fs::path dir = market_inputs("validate_clean");
    REQUIRE(run_cli(run_args(dir, "validate", "out")) == 0);
    REQUIRE(slurp(dir / "out/diagnostics.csv") == std::string(kDiagnosticsHeader) + "\n");
}

TEST_CASE("a risk-free gap fails validation with one diagnostic row") {
    const fs::path dir = market_inputs("validate_gap");
    const fs::path rf = dir / "in/riskfree.csv";
    spit(rf, drop_line(slurp(rf), 7));
    REQUIRE(run_cli(run_args(dir, "validate", "out")) == 2);
    const std::string diags = slurp(dir / "out/diagnostics.csv");
    REQUIRE(count_lines(diags) == 2);
    REQUIRE_THAT(diags, ContainsSubstring("RISKFREE_GAP"));
}

TEST_CASE("an injected duplicate observation row fails validation") {
    const fs::path dir = market_inputs("validate_dup");
    const fs::path returns = dir / "in/returns.csv";
    const std::string rows = slurp(returns);
    spit(returns, rows + nth_line(rows, 2) + "\n");
    REQUIRE(run_cli(run_args(dir, "validate", "out")) == 2);
    const std::string diags = slurp(dir / "out/diagnostics.csv");
    REQUIRE_THAT(diags, ContainsSubstring("DUPLICATE_KEY"));
    REQUIRE_THAT(diags, ContainsSubstring("syn00000"));
}

TEST_CASE("a scheme window outside the panel span is a runtime failure") {
    const fs::path dir = fresh_dir("window_oos");
    spit(dir / "synth.cfg",
         "synth.mode = capm\n"
         "synth.n_securities = 40\n"
         "synth.months = 60\n"
         "synth.seed = 3\n"
         "synth.start_year = 2013\n");
    REQUIRE(run_cli("synth --config " + (dir / "synth.cfg").string() + " --out " +
                    (dir / "in").string()) == 0);
    spit(dir / "run.cfg", "returns = " + (dir / "in/returns.csv").string() + "\n" +
                              "fundamentals = " + (dir / "in/fundamentals.csv").string() + "\n" +
                              "riskfree = " + (dir / "in/riskfree.csv").string() + "\n" +
                              "market = " + (dir / "in/market.csv").string() + "\n");
    REQUIRE(run_cli(run_args(dir, "fmb", "out", "--scheme 1")) == 1);
}

TEST_CASE("the summary table has one row per variant and window") {
    const fs::path dir = market_inputs("fmb_rows");
    REQUIRE(run_cli(run_args(dir, "fmb", "out")) == 0);
    REQUIRE(count_lines(slurp(dir / "out/table3.csv")) == 1 + 4 * 4);
    const std::string md = slurp(dir / "out/table3.md");
    for (const char* section : {"## Group A", "## Group B", "## Group C", "## Group D"})
        REQUIRE_THAT(md, ContainsSubstring(section));
    REQUIRE_THAT(md, ContainsSubstring(kSignificanceLegend));
}

TEST_CASE("selecting one scheme narrows the report to its window") {
    const fs::path dir = market_inputs("fmb_scheme");
    REQUIRE(run_cli(run_args(dir, "fmb", "out", "--scheme 2")) == 0);
    const std::string table = slurp(dir / "out/table3.csv");
    REQUIRE(count_lines(table) == 1 + 4);
    REQUIRE_THAT(table, ContainsSubstring("2013~2016"));
    REQUIRE(run_cli(run_args(dir, "fmb", "out_bad", "--scheme 4")) == 2);
}

TEST_CASE("a missing market series is a configuration failure for fmb") {
    const fs::path dir = market_inputs("fmb_no_market");
    spit(dir / "run.cfg", "returns = " + (dir / "in/returns.csv").string() + "\n" +
                              "fundamentals = " + (dir / "in/fundamentals.csv").string() + "\n" +
                              "riskfree = " + (dir / "in/riskfree.csv").string() + "\n");
    REQUIRE(run_cli(run_args(dir, "fmb", "out")) == 2);
}

TEST_CASE("a zero shell fraction leaves the filtered reports absent") {
    const fs::path dir = market_inputs("fraction_zero");
    REQUIRE(run_cli(run_args(dir, "ff3", "out")) == 0);
    REQUIRE(fs::exists(dir / "out/table10.md"));
    REQUIRE(fs::exists(dir / "out/factors.csv"));
    for (const char* absent : {"table11.md", "table12.md", "factors_filtered.csv",
                               "assignments_filtered.csv", "diagnostics_filtered.csv"})
        REQUIRE(!fs::exists(dir / "out" / absent));
}

TEST_CASE("reruns and thread counts never change output bytes") {
    const fs::path dir = market_inputs("determinism");
    REQUIRE(run_cli(run_args(dir, "ff3", "a", "--shell-fraction 0.2")) == 0);
    REQUIRE(run_cli(run_args(dir, "ff3", "b", "--shell-fraction 0.2 --jobs 4")) == 0);
    REQUIRE(run_cli(run_args(dir, "ff3", "c", "--shell-fraction 0.2")) == 0);
    require_same_dir(dir / "a", dir / "b");
    require_same_dir(dir / "a", dir / "c");
    REQUIRE(run_cli(run_args(dir, "fmb", "fa")) == 0);
    REQUIRE(run_cli(run_args(dir, "fmb", "fb", "--jobs 4")) == 0);
    require_same_dir(dir / "fa", dir / "fb");
}

TEST_CASE("generated inputs reload through the panel loaders") {
    const fs::path dir = market_inputs("synth_reload");
    const MonthlyPanel panel = load_panel((dir / "in/returns.csv").string(),
                                          (dir / "in/fundamentals.csv").string(),
                                          (dir / "in/riskfree.csv").string());
    REQUIRE(panel.observations.size() == 60);
    REQUIRE(load_market_series((dir / "in/market.csv").string()).size() == 240);
    REQUIRE(fs::exists(dir / "in/manifest.csv"));
}

TEST_CASE("unknown configuration keys are rejected") {
    const fs::path dir = fresh_dir("bad_config");
    spit(dir / "bad.cfg", "retruns = somewhere.csv\n");
    REQUIRE(run_cli("validate --config " + (dir / "bad.cfg").string()) == 2);
    spit(dir / "bad2.cfg", "jobs = many\n");
    REQUIRE(run_cli("validate --config " + (dir / "bad2.cfg").string()) == 2);
    REQUIRE(run_cli("validate --config " + (dir / "absent.cfg").string()) == 2);
}

TEST_CASE("malformed command lines fail as validation errors") {
    REQUIRE(run_cli("frobnicate") == 2);
    REQUIRE(run_cli("ff3 --definitely-not-a-flag 1") == 2);
    REQUIRE(run_cli("--help") == 0);
}

TEST_CASE("flags override the configuration file") {
    const fs::path dir = market_inputs("flag_override");
    spit(dir / "run.cfg", slurp(dir / "run.cfg") + "out = " + (dir / "cfg_out").string() + "\n");
    REQUIRE(run_cli("validate --config " + (dir / "run.cfg").string() + " --out " +
                    (dir / "flag_out").string()) == 0);
    REQUIRE(fs::exists(dir / "flag_out/diagnostics.csv"));
    REQUIRE(!fs::exists(dir / "cfg_out"));
}
