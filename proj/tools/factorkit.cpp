// Command-line front end: validate inputs, generate synthetic markets, and
// run the cross-sectional and three-factor studies.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "factorkit/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"factor study toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    unsigned jobs = 1;
    double shell_fraction = 0.0;
    std::uint64_t seed = 1;
    int scheme = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "configuration file (key = value lines)");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--jobs", jobs, "worker thread count");
    };
    CLI::App* validate = app.add_subcommand("validate", "check input files, write diagnostics");
    add_common(validate);
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic market");
    add_common(synth);
    synth->add_option("--seed", seed, "generator seed");
    CLI::App* fmb = app.add_subcommand("fmb", "run the two-pass cross-sectional study");
    add_common(fmb);
    fmb->add_option("--scheme", scheme,
                    "period scheme index; 0 runs all schemes plus the pooled window");
    CLI::App* ff3 = app.add_subcommand("ff3", "run the three-factor study");
    add_common(ff3);
    ff3->add_option("--shell-fraction", shell_fraction,
                    "fraction of smallest stocks dropped in the filtered pass");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    CLI::App* cmd = app.get_subcommands().front();
    auto given = [cmd](const char* name) {
        const CLI::Option* opt = cmd->get_option_no_throw(name);
        return opt && opt->count() > 0;
    };
    try {
        factorkit::RunConfig cfg;
        if (given("--config")) cfg = factorkit::load_run_config(config_path);
        if (given("--out")) cfg.out_dir = out_dir;
        if (given("--jobs")) cfg.jobs = jobs;
        if (given("--seed")) cfg.synth.seed = seed;
        if (given("--scheme")) cfg.scheme_index = scheme;
        if (given("--shell-fraction")) cfg.shell_fraction = shell_fraction;
        cfg.validate();
        if (cmd->get_name() == "validate") return factorkit::cmd_validate(cfg);
        if (cmd->get_name() == "synth") return factorkit::cmd_synth(cfg);
        if (cmd->get_name() == "fmb") return factorkit::cmd_fmb(cfg);
        return factorkit::cmd_ff3(cfg);
    } catch (const factorkit::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return factorkit::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
