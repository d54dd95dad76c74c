#pragma once

// Renders pipeline results as CSV and Markdown strings. Pure formatting:
// no file IO, no statistics beyond unit scaling. CSV files carry full
// precision; Markdown mirrors the published layout with rounded figures
// and significance stars.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "factorkit/csv.hpp"
#include "factorkit/fama_macbeth.hpp"
#include "factorkit/stats.hpp"
#include "factorkit/three_factor.hpp"

namespace factorkit {

// Printed under every table whose coefficients carry stars. Monthly
// coefficient series are heavy-tailed, so normal-theory significance is
// indicative rather than exact; the note travels with the stars.
inline constexpr const char* kFatTailNote =
    "t statistics use normal critical values; monthly coefficient series are "
    "heavy-tailed, so borderline significance is indicative rather than exact.";

namespace detail {

inline std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += fields[i];
    }
    out += '\n';
    return out;
}

inline std::string md_row(const std::vector<std::string>& cells) {
    std::string out = "|";
    for (const auto& c : cells) {
        out += ' ';
        out += c;
        out += " |";
    }
    out += '\n';
    return out;
}

inline std::string md_rule(std::size_t n) {
    std::string out = "|";
    for (std::size_t i = 0; i < n; ++i) out += " --- |";
    out += '\n';
    return out;
}

inline std::string num(double v) {
    return std::isnan(v) ? std::string() : csv::format_double(v);
}

// Rounded value with significance stars from its own t statistic.
inline std::string starred(double v, double t, int decimals, double scale = 1.0) {
    if (std::isnan(v)) return {};
    return csv::format_fixed(v * scale, decimals) + stars(t);
}

inline std::string md_legend() {
    return std::string(kSignificanceLegend) + "\n\n" + kFatTailNote + "\n";
}

inline const char* kSizeNames[5] = {"Small", "2", "3", "4", "Big"};

// Two 5x5 panels side by side under one caption: the published block
// layout. Eleven columns: the size label plus five value columns per panel.
template <class Left, class Right>
inline std::string paired_block(const std::string& left_caption, const std::string& right_caption,
                                Left&& left, Right&& right) {
    std::string out = "**" + left_caption + " | " + right_caption + "**\n\n";
    out += md_row({"Size", "Low", "2", "3", "4", "High", "Low", "2", "3", "4", "High"});
    out += md_rule(11);
    for (int i = 0; i < 5; ++i) {
        std::vector<std::string> cells{kSizeNames[i]};
        for (int j = 0; j < 5; ++j) cells.push_back(left(i, j));
        for (int j = 0; j < 5; ++j) cells.push_back(right(i, j));
        out += md_row(cells);
    }
    out += '\n';
    return out;
}

}  // namespace detail

// ---- Cross-sectional (two-pass) study ----

// Machine form of the window summaries: one row per (variant, window),
// windows in run order (pooled first when present).
inline std::string render_fmb_csv(const FMBRun& run, const std::vector<Variant>& variants) {
    std::string out =
        "variant,window,months,gamma0_minus_rf,t_gamma0_minus_rf,"
        "gamma1,t_gamma1,gamma2,t_gamma2,gamma3,t_gamma3,mean_r_squared\n";
    for (Variant v : variants)
        for (const auto& w : run.windows) {
            auto it = w.variants.find(v);
            if (it == w.variants.end()) continue;
            const VariantWindowReport& rep = it->second;
            std::vector<std::string> f{variant_name(v), rep.window_label,
                                       std::to_string(rep.months),
                                       detail::num(rep.gamma0_minus_rf.mean),
                                       detail::num(rep.gamma0_minus_rf.t)};
            for (int j = 1; j <= 3; ++j) {
                f.push_back(rep.gamma[j] ? detail::num(rep.gamma[j]->mean) : std::string());
                f.push_back(rep.gamma[j] ? detail::num(rep.gamma[j]->t) : std::string());
            }
            f.push_back(detail::num(rep.mean_r_squared));
            out += detail::csv_line(f);
        }
    return out;
}

// One section per variant group, four window rows each; coefficients carry
// stars from their own t statistics, the intercept is reported net of the
// risk-free rate.
inline std::string render_fmb_md(const FMBRun& run, const std::vector<Variant>& variants) {
    std::string out = "# Cross-sectional regression summary\n";
    for (Variant v : variants) {
        out += "\n## Group " + std::string(variant_name(v)) + "\n\n";
        out += detail::md_row({"Window", "gamma0 - Rf", "t(gamma0 - Rf)", "gamma1", "t(gamma1)",
                               "gamma2", "t(gamma2)", "gamma3", "t(gamma3)", "Mean R^2"});
        out += detail::md_rule(10);
        for (const auto& w : run.windows) {
            auto it = w.variants.find(v);
            if (it == w.variants.end()) continue;
            const VariantWindowReport& rep = it->second;
            std::vector<std::string> cells{rep.window_label,
                                           detail::starred(rep.gamma0_minus_rf.mean,
                                                           rep.gamma0_minus_rf.t, 4),
                                           csv::format_fixed(rep.gamma0_minus_rf.t, 2)};
            for (int j = 1; j <= 3; ++j) {
                if (rep.gamma[j]) {
                    cells.push_back(detail::starred(rep.gamma[j]->mean, rep.gamma[j]->t, 4));
                    cells.push_back(csv::format_fixed(rep.gamma[j]->t, 2));
                } else {
                    cells.emplace_back();
                    cells.emplace_back();
                }
            }
            cells.push_back(csv::format_fixed(rep.mean_r_squared, 2));
            out += detail::md_row(cells);
        }
    }
    out += '\n';
    out += detail::md_legend();
    return out;
}

// Month-by-month slope estimates, per-scheme windows only (the pooled
// window is their concatenation).
inline std::string render_gammas_csv(const FMBRun& run, const std::vector<Variant>& variants) {
    std::string out = "variant,window,year,month,gamma0,gamma1,gamma2,gamma3,r_squared\n";
    for (Variant v : variants)
        for (const auto& sr : run.schemes) {
            auto it = sr.gammas.find(v);
            if (it == sr.gammas.end()) continue;
            const std::string label = sr.scheme.testing_label();
            for (const auto& [m, g] : it->second)
                out += detail::csv_line({variant_name(v), label, std::to_string(m.year),
                                         std::to_string(m.month), detail::num(g.g[0]),
                                         detail::num(g.g[1]), detail::num(g.g[2]),
                                         detail::num(g.g[3]), detail::num(g.r_squared)});
        }
    return out;
}

inline std::string render_verdicts_csv(const FMBRun& run, const std::vector<Variant>& variants) {
    std::string out = "window,hypothesis,source_variant,t,one_sided,reject_at_10,reject_at_5,reject_at_1\n";
    auto selected = [&](Variant v) {
        return std::find(variants.begin(), variants.end(), v) != variants.end();
    };
    for (const auto& w : run.windows)
        for (const auto& h : w.verdicts) {
            if (!selected(h.source)) continue;
            out += detail::csv_line({w.label, h.hypothesis, variant_name(h.source),
                                     detail::num(h.t), h.one_sided ? "1" : "0",
                                     verdict_name(h.at_10), verdict_name(h.at_5),
                                     verdict_name(h.at_1)});
        }
    return out;
}

// ---- Three-factor study ----

inline std::string render_factors_csv(const FactorSeries& factors) {
    std::string out = "year,month,mkt_excess,smb,hml\n";
    for (const auto& [m, f] : factors.months)
        out += detail::csv_line({std::to_string(m.year), std::to_string(m.month),
                                 detail::num(f.mkt_excess), detail::num(f.smb),
                                 detail::num(f.hml)});
    return out;
}

inline std::string render_assignments_csv(const SnapshotTable& table) {
    std::string out = "formation_year,security_id,scheme,cell\n";
    for (const auto& [year, a23] : table.cells23) {
        for (const auto& [id, cell] : a23.cells)
            out += detail::csv_line({std::to_string(year), id,
                                     sort_scheme_name(SortScheme::two_by_three),
                                     cell_label(SortScheme::two_by_three, cell)});
        auto it55 = table.cells55.find(year);
        if (it55 == table.cells55.end()) continue;
        for (const auto& [id, cell] : it55->second.cells)
            out += detail::csv_line({std::to_string(year), id,
                                     sort_scheme_name(SortScheme::five_by_five),
                                     cell_label(SortScheme::five_by_five, cell)});
    }
    return out;
}

// One statistic over the 5x5 grid, row-major; empty value for cells the
// statistic is undefined on.
template <class Value>
inline std::string render_grid_csv(Value&& value) {
    std::string out = "size_q,beme_q,value\n";
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            out += detail::csv_line({std::to_string(i + 1), std::to_string(j + 1),
                                     detail::num(value(i, j))});
    return out;
}

inline std::string render_high_low_csv(const SpreadTests& spreads) {
    std::string out = "size_q,value,t\n";
    for (int q = 1; q <= 5; ++q) {
        const auto& s = spreads.high_low[q - 1];
        out += detail::csv_line({std::to_string(q), s ? detail::num(s->mean) : std::string(),
                                 s ? detail::num(s->t) : std::string()});
    }
    return out;
}

inline std::string render_big_small_csv(const SpreadTests& spreads) {
    std::string out = "beme_q,value,t\n";
    for (int q = 1; q <= 5; ++q) {
        const auto& s = spreads.big_small[q - 1];
        out += detail::csv_line({std::to_string(q), s ? detail::num(s->mean) : std::string(),
                                 s ? detail::num(s->t) : std::string()});
    }
    return out;
}

inline std::string render_descriptive_md(const DescriptiveGrid& d) {
    auto stat = [&d](double CellDescriptives::*field, int decimals, double scale) {
        return [&d, field, decimals, scale](int i, int j) {
            return csv::format_fixed(d.cell[i][j].*field * scale, decimals);
        };
    };
    std::string out = "# Descriptive statistics of the 25 size and book-to-market portfolios\n\n";
    out += detail::paired_block("Mean market value", "Mean company count",
                                stat(&CellDescriptives::mean_market_value, 2, 1.0),
                                stat(&CellDescriptives::mean_count, 1, 1.0));
    out += detail::paired_block("Mean market-value share (%)", "Mean monthly excess return (%)",
                                stat(&CellDescriptives::mean_value_share, 2, 100.0),
                                stat(&CellDescriptives::mean_excess_return, 2, 100.0));
    return out;
}

// Mean excess returns with High-Low and Big-Small margins; margins carry
// stars from their one-sample t statistics.
inline std::string render_spread_md(const DescriptiveGrid& d, const SpreadTests& spreads,
                                    const std::string& title) {
    std::string out = "# " + title + "\n\n";
    out += detail::md_row({"Size", "Low", "2", "3", "4", "High", "High-Low"});
    out += detail::md_rule(7);
    for (int i = 0; i < 5; ++i) {
        std::vector<std::string> cells{detail::kSizeNames[i]};
        for (int j = 0; j < 5; ++j)
            cells.push_back(csv::format_fixed(d.cell[i][j].mean_excess_return * 100.0, 2));
        const auto& s = spreads.high_low[i];
        cells.push_back(s ? detail::starred(s->mean, s->t, 3, 100.0) : std::string());
        out += detail::md_row(cells);
    }
    std::vector<std::string> last{"Big-Small"};
    for (int j = 0; j < 5; ++j) {
        const auto& s = spreads.big_small[j];
        last.push_back(s ? detail::starred(s->mean, s->t, 3, 100.0) : std::string());
    }
    last.emplace_back();
    out += detail::md_row(last);
    out += '\n';
    out += detail::md_legend();
    return out;
}

// Regression grid in paired blocks: each coefficient beside its t panel,
// then adjusted R^2 beside the residual standard error (in percent).
inline std::string render_grid_md(const GridResult& g, const std::string& title) {
    auto coef = [&g](double CellStats::*value, double CellStats::*t, int decimals) {
        return [&g, value, t, decimals](int i, int j) {
            const CellStats& c = g.cell[i][j];
            return detail::starred(c.*value, c.*t, decimals);
        };
    };
    auto plain = [&g](double CellStats::*value, int decimals, double scale) {
        return [&g, value, decimals, scale](int i, int j) {
            return csv::format_fixed(g.cell[i][j].*value * scale, decimals);
        };
    };
    std::string out = "# " + title + "\n\n";
    if (g.spec == SpecKind::smb_hml_only && g.with_intercept)
        out += detail::paired_block("a", "t(a)", coef(&CellStats::a, &CellStats::t_a, 4),
                                    plain(&CellStats::t_a, 2, 1.0));
    if (g.spec != SpecKind::smb_hml_only)
        out += detail::paired_block("b", "t(b)", coef(&CellStats::b, &CellStats::t_b, 2),
                                    plain(&CellStats::t_b, 2, 1.0));
    if (g.spec != SpecKind::mkt_only) {
        out += detail::paired_block("s", "t(s)", coef(&CellStats::s, &CellStats::t_s, 2),
                                    plain(&CellStats::t_s, 2, 1.0));
        out += detail::paired_block("h", "t(h)", coef(&CellStats::h, &CellStats::t_h, 2),
                                    plain(&CellStats::t_h, 2, 1.0));
    }
    out += detail::paired_block("adj R^2", "s(e) (%)",
                                plain(&CellStats::adj_r_squared, 2, 1.0),
                                plain(&CellStats::resid_sd, 2, 100.0));
    out += detail::md_legend();
    return out;
}

}  // namespace factorkit
