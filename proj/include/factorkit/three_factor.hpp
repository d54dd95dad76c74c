#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "factorkit/factors.hpp"
#include "factorkit/ols.hpp"
#include "factorkit/panel.hpp"
#include "factorkit/parallel.hpp"
#include "factorkit/stats.hpp"

namespace factorkit {

// Regressor subsets for the time-series fits of portfolio excess returns:
// (a) market factor only, (b) SMB and HML as printed (no intercept unless
// switched on), (c) all three factors.
enum class SpecKind { mkt_only, smb_hml_only, three_factor };

inline const char* spec_kind_name(SpecKind k) {
    switch (k) {
        case SpecKind::mkt_only: return "MKT_ONLY";
        case SpecKind::smb_hml_only: return "SMB_HML_ONLY";
        case SpecKind::three_factor: return "THREE_FACTOR";
    }
    return "?";
}

struct CellStats {
    static constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
    double a = kNan, b = kNan, s = kNan, h = kNan;
    double t_a = kNan, t_b = kNan, t_s = kNan, t_h = kNan;
    double r_squared = kNan, adj_r_squared = kNan, resid_sd = kNan;
    std::size_t n = 0;
    bool missing = true;
};

// One statistic grid per spec; cells indexed [size quintile - 1][beme
// quintile - 1], both ascending.
struct GridResult {
    SpecKind spec = SpecKind::three_factor;
    bool with_intercept = true;
    CellStats cell[5][5];
    std::vector<Diagnostic> diagnostics;
};

struct SpecOptions {
    std::size_t min_overlap = 36;
    bool smb_hml_intercept = false;
    unsigned jobs = 1;
};

inline GridResult run_spec(SpecKind spec, const PortfolioSeries& portfolios,
                           const FactorSeries& factors, const SpecOptions& opts = {}) {
    GridResult out;
    out.spec = spec;
    out.with_intercept = spec != SpecKind::smb_hml_only || opts.smb_hml_intercept;
    const bool use_mkt = spec != SpecKind::smb_hml_only;
    const bool use_smb_hml = spec != SpecKind::mkt_only;

    std::vector<std::vector<Diagnostic>> diag_slots(25);
    parallel_for(25, opts.jobs, [&](std::size_t idx) {
        const CellRef ref{static_cast<int>(idx) / 5 + 1, static_cast<int>(idx) % 5 + 1};
        CellStats& cs = out.cell[ref.size_q - 1][ref.beme_q - 1];

        auto pit = portfolios.excess.find(ref);
        std::vector<double> y;
        std::vector<FactorObservation> f;
        if (pit != portfolios.excess.end()) {
            for (const auto& [m, r] : pit->second) {
                auto fit = factors.months.find(m);
                if (fit == factors.months.end()) continue;
                y.push_back(r);
                f.push_back(fit->second);
            }
        }
        if (y.size() < opts.min_overlap) {
            diag_slots[idx].push_back({"INSUFFICIENT_OVERLAP", "", cell_label(SortScheme::five_by_five, ref),
                                       std::to_string(y.size()) + " overlapping months, need " +
                                           std::to_string(opts.min_overlap)});
            return;
        }

        const std::size_t k = (out.with_intercept ? 1 : 0) + (use_mkt ? 1 : 0) +
                              (use_smb_hml ? 2 : 0);
        DesignMatrix X(y.size(), k, out.with_intercept);
        for (std::size_t t = 0; t < y.size(); ++t) {
            std::size_t c = 0;
            if (out.with_intercept) X.at(t, c++) = 1.0;
            if (use_mkt) X.at(t, c++) = f[t].mkt_excess;
            if (use_smb_hml) {
                X.at(t, c++) = f[t].smb;
                X.at(t, c) = f[t].hml;
            }
        }
        const RegressionResult fit = ols_fit(X, y);
        std::size_t c = 0;
        if (out.with_intercept) {
            cs.a = fit.coefficients[c];
            cs.t_a = fit.t_stats[c];
            ++c;
        }
        if (use_mkt) {
            cs.b = fit.coefficients[c];
            cs.t_b = fit.t_stats[c];
            ++c;
        }
        if (use_smb_hml) {
            cs.s = fit.coefficients[c];
            cs.t_s = fit.t_stats[c];
            ++c;
            cs.h = fit.coefficients[c];
            cs.t_h = fit.t_stats[c];
        }
        cs.r_squared = fit.r_squared;
        cs.adj_r_squared = fit.adj_r_squared;
        cs.resid_sd = fit.residual_sd;
        cs.n = fit.n_obs;
        cs.missing = false;
    });
    for (auto& slot : diag_slots)
        out.diagnostics.insert(out.diagnostics.end(), slot.begin(), slot.end());
    return out;
}

// Per-cell time averages: monthly mean member market cap, member count,
// cell share of total market cap (normalized within each month, so the 25
// mean shares sum to one), and the value-weighted excess return. Count and
// share average over every covered month (zero when the cell is empty);
// value and return average over the months where they exist.
struct CellDescriptives {
    double mean_market_value = 0.0;
    double mean_count = 0.0;
    double mean_value_share = 0.0;
    double mean_excess_return = 0.0;
    std::size_t months = 0;        // months with members
    std::size_t return_months = 0; // months with a weighted return
};

struct DescriptiveGrid {
    CellDescriptives cell[5][5];
    std::size_t months = 0;
    std::vector<Diagnostic> diagnostics;
};

inline DescriptiveGrid descriptive_stats(const MonthlyPanel& panel, const SnapshotTable& table) {
    DescriptiveGrid out;
    const std::vector<MonthKey> months = detail::factor_months(panel, table);
    if (months.empty()) raise(Errc::empty_window, "no months covered by snapshots");

    double sum_value[5][5] = {}, sum_count[5][5] = {}, sum_share[5][5] = {}, sum_ret[5][5] = {};
    std::size_t n_value[5][5] = {}, n_ret[5][5] = {};

    for (const MonthKey m : months) {
        const auto& assignment = table.cells55.at(formation_year_of(m));
        const auto members = detail::members_by_cell(assignment);

        double cap[5][5] = {};
        int cnt[5][5] = {};
        double total_cap = 0.0;
        for (const auto& [ref, ids] : members) {
            const int i = ref.size_q - 1, j = ref.beme_q - 1;
            for (const auto& id : ids) {
                const Obs* ob = panel.find_obs(id, m);
                if (!ob || ob->status == Status::missing || !std::isfinite(ob->market_cap))
                    continue;
                cap[i][j] += ob->market_cap;
                ++cnt[i][j];
            }
            total_cap += cap[i][j];
        }
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                sum_count[i][j] += cnt[i][j];
                if (total_cap > 0.0) sum_share[i][j] += cap[i][j] / total_cap;
                if (cnt[i][j] > 0) {
                    sum_value[i][j] += cap[i][j] / cnt[i][j];
                    ++n_value[i][j];
                }
            }
        for (const auto& [ref, ids] : members) {
            const auto r = try_value_weighted_return(panel, ids, m, &out.diagnostics);
            if (r) {
                sum_ret[ref.size_q - 1][ref.beme_q - 1] += *r - panel.monthly_rf(m);
                ++n_ret[ref.size_q - 1][ref.beme_q - 1];
            }
        }
    }
    out.months = months.size();
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            CellDescriptives& c = out.cell[i][j];
            c.mean_count = sum_count[i][j] / static_cast<double>(months.size());
            c.mean_value_share = sum_share[i][j] / static_cast<double>(months.size());
            c.months = n_value[i][j];
            c.return_months = n_ret[i][j];
            c.mean_market_value =
                n_value[i][j] ? sum_value[i][j] / static_cast<double>(n_value[i][j])
                              : std::numeric_limits<double>::quiet_NaN();
            c.mean_excess_return =
                n_ret[i][j] ? sum_ret[i][j] / static_cast<double>(n_ret[i][j])
                            : std::numeric_limits<double>::quiet_NaN();
        }
    return out;
}

struct SpreadStat {
    double mean = 0.0;
    double sd = 0.0;
    double t = 0.0;
    std::size_t n = 0;
    bool zero_dispersion = false;
};

// High minus Low across value quintiles within each size row, and Big minus
// Small across size quintiles within each value column; one-sample t of the
// monthly difference series.
struct SpreadTests {
    std::optional<SpreadStat> high_low[5];
    std::optional<SpreadStat> big_small[5];
    std::vector<Diagnostic> diagnostics;
};

namespace detail {

inline std::optional<SpreadStat> spread_series(const PortfolioSeries& portfolios, CellRef hi,
                                               CellRef lo, const char* label,
                                               std::vector<Diagnostic>& diags) {
    auto hit = portfolios.excess.find(hi);
    auto lit = portfolios.excess.find(lo);
    std::vector<double> diff;
    if (hit != portfolios.excess.end() && lit != portfolios.excess.end()) {
        for (const auto& [m, r] : hit->second) {
            auto other = lit->second.find(m);
            if (other != lit->second.end()) diff.push_back(r - other->second);
        }
    }
    if (diff.size() < 2) {
        diags.push_back({"INSUFFICIENT_OVERLAP", "", label,
                         std::to_string(diff.size()) + " overlapping months, need 2"});
        return std::nullopt;
    }
    const SeriesStats st = series_stats(diff);
    return SpreadStat{st.mean, st.sd, st.t, st.n, st.sd == 0.0};
}

}  // namespace detail

inline SpreadTests spread_tests(const PortfolioSeries& portfolios) {
    SpreadTests out;
    for (int q = 1; q <= 5; ++q) {
        out.high_low[q - 1] = detail::spread_series(portfolios, CellRef{q, 5}, CellRef{q, 1},
                                                    "high-low", out.diagnostics);
        out.big_small[q - 1] = detail::spread_series(portfolios, CellRef{5, q}, CellRef{1, q},
                                                     "big-small", out.diagnostics);
    }
    return out;
}

struct StudyOptions {
    double shell_fraction = 0.0;
    std::size_t min_overlap = 36;
    bool smb_hml_intercept = false;
    unsigned jobs = 1;
};

// One full pass: snapshots (optionally shell-filtered), factors, the 25
// portfolios, descriptives, margins, and the three regression grids.
struct StudyResult {
    SnapshotTable table;
    FactorSeries factors;
    PortfolioSeries portfolios;
    DescriptiveGrid descriptive;
    SpreadTests spreads;
    GridResult mkt_only;
    GridResult smb_hml_only;
    GridResult three_factor_grid;
};

inline StudyResult run_study(const MonthlyPanel& panel, const StudyOptions& opts = {}) {
    StudyResult r;
    r.table = build_snapshot_table(panel, opts.shell_fraction);
    r.factors = build_factor_series(panel, r.table, opts.jobs);
    r.portfolios = build_portfolio_series(panel, r.table, opts.jobs);
    r.descriptive = descriptive_stats(panel, r.table);
    r.spreads = spread_tests(r.portfolios);
    SpecOptions so{opts.min_overlap, opts.smb_hml_intercept, opts.jobs};
    r.mkt_only = run_spec(SpecKind::mkt_only, r.portfolios, r.factors, so);
    r.smb_hml_only = run_spec(SpecKind::smb_hml_only, r.portfolios, r.factors, so);
    r.three_factor_grid = run_spec(SpecKind::three_factor, r.portfolios, r.factors, so);
    return r;
}

// Paired unfiltered/filtered studies for the small-cap shell comparison.
inline std::pair<StudyResult, StudyResult> run_filtered_study(const MonthlyPanel& panel,
                                                              double fraction,
                                                              StudyOptions opts = {}) {
    StudyOptions base = opts;
    base.shell_fraction = 0.0;
    StudyOptions cut = opts;
    cut.shell_fraction = fraction;
    return {run_study(panel, base), run_study(panel, cut)};
}

}  // namespace factorkit
