#pragma once

// Pipeline orchestration behind the command-line front end. Each command
// loads its inputs, runs the study, and writes report files into the
// configured output directory. All outputs are deterministic functions of
// (inputs, config); the parallelism degree never changes a byte.

#include <filesystem>
#include <string>
#include <system_error>
#include <vector>

#include "factorkit/panel_io.hpp"
#include "factorkit/run_config.hpp"
#include "factorkit/tables.hpp"
#include "factorkit/three_factor.hpp"

namespace factorkit {

// Exit contract: 0 success, 1 runtime failure, 2 validation failure.
// Input-shaped problems (bad files, bad config) are validation failures.
inline int exit_code_for(Errc code) {
    switch (code) {
        case Errc::malformed_row:
        case Errc::duplicate_key:
        case Errc::riskfree_gap:
        case Errc::empty_input:
        case Errc::invalid_config:
        case Errc::io_error:
            return 2;
        default:
            return 1;
    }
}

namespace detail {

inline std::string out_file(const RunConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline void ensure_out_dir(const RunConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec)
        raise(Errc::io_error,
              "cannot create output directory " + cfg.out_dir + ": " + ec.message());
}

inline std::vector<Diagnostic> study_diagnostics(const StudyResult& s) {
    std::vector<Diagnostic> out;
    auto add = [&out](const std::vector<Diagnostic>& d) {
        out.insert(out.end(), d.begin(), d.end());
    };
    add(s.table.diagnostics);
    add(s.factors.diagnostics);
    add(s.portfolios.diagnostics);
    add(s.descriptive.diagnostics);
    add(s.spreads.diagnostics);
    add(s.mkt_only.diagnostics);
    add(s.smb_hml_only.diagnostics);
    add(s.three_factor_grid.diagnostics);
    return out;
}

// One CSV per statistic the grid estimates; specs without a coefficient
// skip its files rather than writing all-empty grids.
inline void write_regression_grid_csvs(const RunConfig& cfg, const GridResult& g,
                                       const std::string& prefix) {
    auto cell = [&g](double CellStats::*field) {
        return [&g, field](int i, int j) { return g.cell[i][j].*field; };
    };
    auto put = [&](const char* stat, double CellStats::*field) {
        csv::write_file(out_file(cfg, prefix + "_" + stat + ".csv"),
                        render_grid_csv(cell(field)));
    };
    if (g.spec != SpecKind::smb_hml_only || g.with_intercept) {
        put("a", &CellStats::a);
        put("t_a", &CellStats::t_a);
    }
    if (g.spec != SpecKind::smb_hml_only) {
        put("b", &CellStats::b);
        put("t_b", &CellStats::t_b);
    }
    if (g.spec != SpecKind::mkt_only) {
        put("s", &CellStats::s);
        put("t_s", &CellStats::t_s);
        put("h", &CellStats::h);
        put("t_h", &CellStats::t_h);
    }
    put("adj_r2", &CellStats::adj_r_squared);
    put("s_e", &CellStats::resid_sd);
}

inline void write_descriptive_grid_csv(const RunConfig& cfg, const DescriptiveGrid& d,
                                       const std::string& name,
                                       double CellDescriptives::*field) {
    csv::write_file(out_file(cfg, name),
                    render_grid_csv([&d, field](int i, int j) { return d.cell[i][j].*field; }));
}

inline void write_spread_files(const RunConfig& cfg, const StudyResult& s,
                               const std::string& prefix, const std::string& title) {
    write_descriptive_grid_csv(cfg, s.descriptive, prefix + "_excess_return.csv",
                               &CellDescriptives::mean_excess_return);
    csv::write_file(out_file(cfg, prefix + "_high_low.csv"), render_high_low_csv(s.spreads));
    csv::write_file(out_file(cfg, prefix + "_big_small.csv"), render_big_small_csv(s.spreads));
    csv::write_file(out_file(cfg, prefix + ".md"),
                    render_spread_md(s.descriptive, s.spreads, title));
}

}  // namespace detail

// Schema and coverage checks over the input files; writes the full
// diagnostic list and reports clean/dirty through the exit code.
inline int cmd_validate(const RunConfig& cfg) {
    detail::ensure_out_dir(cfg);
    LoadResult r =
        load_panel_checked(cfg.returns_path, cfg.fundamentals_path, cfg.riskfree_path);
    if (!cfg.market_path.empty()) {
        try {
            load_market_series(cfg.market_path);
        } catch (const Error& e) {
            r.diagnostics.push_back({errc_name(e.code()), "", cfg.market_path, e.what()});
        }
    }
    write_diagnostics(r.diagnostics, detail::out_file(cfg, "diagnostics.csv"));
    return r.diagnostics.empty() ? 0 : 2;
}

inline int cmd_synth(const RunConfig& cfg) {
    detail::ensure_out_dir(cfg);
    const SyntheticMarket market = cfg.synth_mode == SynthMode::capm
                                       ? generate_capm_market(cfg.synth)
                                       : generate_ff3_market(cfg.synth);
    write_market_inputs(cfg.out_dir, market);
    return 0;
}

// Two-pass cross-sectional study over the configured period schemes.
inline int cmd_fmb(const RunConfig& cfg) {
    if (cfg.market_path.empty())
        raise(Errc::invalid_config, "the cross-sectional study needs a market series (market=...)");
    detail::ensure_out_dir(cfg);
    const MonthlyPanel panel =
        load_panel(cfg.returns_path, cfg.fundamentals_path, cfg.riskfree_path);
    const MonthlySeries market = load_market_series(cfg.market_path);
    std::vector<PeriodScheme> schemes = cfg.schemes;
    if (cfg.scheme_index > 0)
        schemes = {cfg.schemes.at(static_cast<std::size_t>(cfg.scheme_index) - 1)};
    FMBOptions opts;
    opts.n_groups = cfg.n_groups;
    opts.min_obs = cfg.min_obs;
    opts.jobs = cfg.jobs;
    const FMBRun run = run_fama_macbeth(panel, market, schemes, opts);
    csv::write_file(detail::out_file(cfg, "table3.csv"), render_fmb_csv(run, cfg.variants));
    csv::write_file(detail::out_file(cfg, "table3.md"), render_fmb_md(run, cfg.variants));
    csv::write_file(detail::out_file(cfg, "gammas_monthly.csv"),
                    render_gammas_csv(run, cfg.variants));
    csv::write_file(detail::out_file(cfg, "verdicts.csv"), render_verdicts_csv(run, cfg.variants));
    write_diagnostics(run.diagnostics, detail::out_file(cfg, "diagnostics.csv"));
    return 0;
}

// Three-factor study: descriptives, excess-return grids with margins, and
// the regression grids; a second shell-filtered pass when configured.
inline int cmd_ff3(const RunConfig& cfg) {
    detail::ensure_out_dir(cfg);
    const MonthlyPanel panel =
        load_panel(cfg.returns_path, cfg.fundamentals_path, cfg.riskfree_path);
    StudyOptions opts;
    opts.shell_fraction = 0.0;
    opts.min_overlap = cfg.min_overlap;
    opts.smb_hml_intercept = cfg.smb_hml_intercept;
    opts.jobs = cfg.jobs;
    const StudyResult base = run_study(panel, opts);

    csv::write_file(detail::out_file(cfg, "factors.csv"), render_factors_csv(base.factors));
    csv::write_file(detail::out_file(cfg, "assignments.csv"),
                    render_assignments_csv(base.table));
    detail::write_descriptive_grid_csv(cfg, base.descriptive, "table6_market_value.csv",
                                       &CellDescriptives::mean_market_value);
    detail::write_descriptive_grid_csv(cfg, base.descriptive, "table6_company_count.csv",
                                       &CellDescriptives::mean_count);
    detail::write_descriptive_grid_csv(cfg, base.descriptive, "table6_value_share.csv",
                                       &CellDescriptives::mean_value_share);
    detail::write_descriptive_grid_csv(cfg, base.descriptive, "table6_excess_return.csv",
                                       &CellDescriptives::mean_excess_return);
    csv::write_file(detail::out_file(cfg, "table6.md"), render_descriptive_md(base.descriptive));
    detail::write_spread_files(cfg, base, "table7",
                               "Mean monthly excess returns (%) with value and size spreads");
    detail::write_regression_grid_csvs(cfg, base.mkt_only, "table8");
    csv::write_file(detail::out_file(cfg, "table8.md"),
                    render_grid_md(base.mkt_only, "Market-model regressions of the 25 portfolios"));
    detail::write_regression_grid_csvs(cfg, base.smb_hml_only, "table9");
    csv::write_file(detail::out_file(cfg, "table9.md"),
                    render_grid_md(base.smb_hml_only,
                                   "Size and value factor regressions of the 25 portfolios"));
    detail::write_regression_grid_csvs(cfg, base.three_factor_grid, "table10");
    csv::write_file(detail::out_file(cfg, "table10.md"),
                    render_grid_md(base.three_factor_grid,
                                   "Three-factor regressions of the 25 portfolios"));
    write_diagnostics(detail::study_diagnostics(base), detail::out_file(cfg, "diagnostics.csv"));

    if (cfg.shell_fraction > 0.0) {
        StudyOptions cut = opts;
        cut.shell_fraction = cfg.shell_fraction;
        const StudyResult filtered = run_study(panel, cut);
        csv::write_file(detail::out_file(cfg, "factors_filtered.csv"),
                        render_factors_csv(filtered.factors));
        csv::write_file(detail::out_file(cfg, "assignments_filtered.csv"),
                        render_assignments_csv(filtered.table));
        detail::write_spread_files(
            cfg, filtered, "table11",
            "Mean monthly excess returns (%) after excluding the smallest stocks");
        detail::write_regression_grid_csvs(cfg, filtered.three_factor_grid, "table12");
        csv::write_file(
            detail::out_file(cfg, "table12.md"),
            render_grid_md(filtered.three_factor_grid,
                           "Three-factor regressions after excluding the smallest stocks"));
        write_diagnostics(detail::study_diagnostics(filtered),
                          detail::out_file(cfg, "diagnostics_filtered.csv"));
    }
    return 0;
}

}  // namespace factorkit
