#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "factorkit/errors.hpp"
#include "factorkit/month.hpp"
#include "factorkit/ols.hpp"
#include "factorkit/panel.hpp"
#include "factorkit/parallel.hpp"
#include "factorkit/stats.hpp"

namespace factorkit {

// Inclusive calendar-year range.
struct YearRange {
    int first = 0;
    int last = 0;
    friend auto operator<=>(const YearRange&, const YearRange&) = default;
};

// Formation -> initial estimation -> testing, back to back. Portfolios are
// formed on formation-window betas, regressors re-estimated yearly on a
// window growing from the start of the initial estimation period.
struct PeriodScheme {
    YearRange formation;
    YearRange initial_estimation;
    YearRange testing;

    void validate() const {
        auto ordered = [](const YearRange& r) { return r.first <= r.last; };
        if (!ordered(formation) || !ordered(initial_estimation) || !ordered(testing))
            raise(Errc::invalid_config, "scheme year ranges must be ascending");
        if (initial_estimation.first != formation.last + 1)
            raise(Errc::invalid_config, "initial estimation must start right after formation");
        if (testing.first != initial_estimation.last + 1)
            raise(Errc::invalid_config, "testing must start right after initial estimation");
    }

    std::string testing_label() const {
        return std::to_string(testing.first) + "~" + std::to_string(testing.last);
    }
};

inline std::vector<PeriodScheme> default_schemes() {
    return {
        PeriodScheme{{2000, 2003}, {2004, 2008}, {2009, 2012}},
        PeriodScheme{{2001, 2007}, {2008, 2012}, {2013, 2016}},
        PeriodScheme{{2005, 2011}, {2012, 2016}, {2017, 2019}},
    };
}

struct BetaPortfolioSet {
    std::map<std::string, int> assignments;  // security -> 1-based portfolio index
    std::vector<int> sizes;                  // sizes[p-1], ascending-beta order
};

// Ascending beta sort into n_groups buckets of floor(N / n_groups), with the
// remainder split between the two extreme portfolios (low end gets the odd
// extra). Ties in beta break by security id.
inline BetaPortfolioSet form_beta_portfolios(const std::map<std::string, double>& betas,
                                             int n_groups = 20) {
    if (n_groups < 1) raise(Errc::invalid_config, "n_groups must be positive");
    if (betas.size() < static_cast<std::size_t>(n_groups))
        raise(Errc::too_few_securities, "need at least " + std::to_string(n_groups) +
                                            " securities, got " + std::to_string(betas.size()));
    std::vector<std::pair<double, std::string>> order;
    order.reserve(betas.size());
    for (const auto& [id, b] : betas) {
        if (!std::isfinite(b)) raise(Errc::malformed_row, "non-finite beta for " + id);
        order.emplace_back(b, id);
    }
    std::sort(order.begin(), order.end());

    const int n = static_cast<int>(order.size());
    const int q = n / n_groups;
    const int r = n % n_groups;
    BetaPortfolioSet out;
    out.sizes.assign(n_groups, q);
    out.sizes.front() += (r + 1) / 2;
    if (n_groups > 1) out.sizes.back() += r / 2;
    else out.sizes.front() = n;

    std::size_t pos = 0;
    for (int p = 0; p < n_groups; ++p)
        for (int k = 0; k < out.sizes[p]; ++k) out.assignments[order[pos++].second] = p + 1;
    return out;
}

// One testing year of frozen regressors plus that year's monthly
// equal-weighted portfolio returns. Portfolio slots with no usable member
// hold NaN (regressors) or nullopt (returns).
struct RollingYear {
    int testing_year = 0;
    std::vector<double> beta;     // mean member beta
    std::vector<double> beta_sq;  // mean of squared member betas
    std::vector<double> s_bar;    // mean member residual sd
    std::map<MonthKey, std::vector<std::optional<double>>> returns;
};

struct RollingEstimates {
    std::vector<RollingYear> years;
    std::vector<Diagnostic> diagnostics;
};

namespace detail {

// Paired (security, market) return observations within [first, last].
inline void window_pairs(const MonthlyPanel& panel, const MonthlySeries& market,
                         const std::string& id, MonthKey first, MonthKey last,
                         std::vector<double>& ri, std::vector<double>& rm) {
    ri.clear();
    rm.clear();
    auto it = panel.observations.find(id);
    if (it == panel.observations.end()) return;
    for (auto ob = it->second.lower_bound(first); ob != it->second.end() && !(last < ob->first);
         ++ob) {
        if (ob->second.status == Status::missing || !std::isfinite(ob->second.ret)) continue;
        auto mk = market.find(ob->first);
        if (mk == market.end() || !std::isfinite(mk->second)) continue;
        ri.push_back(ob->second.ret);
        rm.push_back(mk->second);
    }
}

}  // namespace detail

// Yearly rolling first-pass estimates. For testing year y the per-security
// market model runs on [initial_estimation.first Jan, (y-1) Dec]; securities
// with fewer than min_obs paired months that year are dropped with a
// TOO_FEW_OBS diagnostic.
inline RollingEstimates rolling_estimates(const MonthlyPanel& panel, const MonthlySeries& market,
                                          const PeriodScheme& scheme,
                                          const BetaPortfolioSet& portfolios,
                                          int min_obs = kDefaultMinBetaObs, unsigned jobs = 1) {
    scheme.validate();
    const MonthKey est_first{scheme.initial_estimation.first, 1};
    const MonthKey test_last{scheme.testing.last, 12};
    if (est_first < panel.span_first() || panel.span_last() < test_last)
        raise(Errc::window_out_of_span,
              "scheme needs " + est_first.str() + ".." + test_last.str() + ", panel spans " +
                  panel.span_first().str() + ".." + panel.span_last().str());

    const int n_groups = static_cast<int>(portfolios.sizes.size());
    std::vector<std::string> ids;
    ids.reserve(portfolios.assignments.size());
    for (const auto& [id, p] : portfolios.assignments) ids.push_back(id);

    RollingEstimates out;
    for (int y = scheme.testing.first; y <= scheme.testing.last; ++y) {
        RollingYear year;
        year.testing_year = y;

        struct MemberFit {
            bool ok = false;
            double beta = 0.0, resid_sd = 0.0;
        };
        std::vector<MemberFit> fits(ids.size());
        const MonthKey win_last{y - 1, 12};
        parallel_for(ids.size(), jobs, [&](std::size_t i) {
            thread_local std::vector<double> ri, rm;
            detail::window_pairs(panel, market, ids[i], est_first, win_last, ri, rm);
            if (ri.size() < static_cast<std::size_t>(min_obs)) return;
            const BetaEstimate est = market_model(ri, rm, min_obs);
            fits[i] = {true, est.beta, est.residual_sd};
        });

        std::vector<double> sum_b(n_groups, 0.0), sum_b2(n_groups, 0.0), sum_s(n_groups, 0.0);
        std::vector<int> counts(n_groups, 0);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const int p = portfolios.assignments.at(ids[i]) - 1;
            if (!fits[i].ok) {
                out.diagnostics.push_back({"TOO_FEW_OBS", ids[i], est_first.str() + ".." + win_last.str(),
                                           "dropped from testing year " + std::to_string(y)});
                continue;
            }
            sum_b[p] += fits[i].beta;
            sum_b2[p] += fits[i].beta * fits[i].beta;
            sum_s[p] += fits[i].resid_sd;
            ++counts[p];
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        year.beta.assign(n_groups, nan);
        year.beta_sq.assign(n_groups, nan);
        year.s_bar.assign(n_groups, nan);
        for (int p = 0; p < n_groups; ++p) {
            if (counts[p] == 0) {
                out.diagnostics.push_back({"EMPTY_PORTFOLIO", "", std::to_string(y),
                                           "portfolio " + std::to_string(p + 1) +
                                               " has no estimated members"});
                continue;
            }
            year.beta[p] = sum_b[p] / counts[p];
            year.beta_sq[p] = sum_b2[p] / counts[p];
            year.s_bar[p] = sum_s[p] / counts[p];
        }

        for (int mo = 1; mo <= 12; ++mo) {
            const MonthKey m{y, mo};
            std::vector<double> sum_r(n_groups, 0.0);
            std::vector<int> nr(n_groups, 0);
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (!fits[i].ok) continue;
                const Obs* ob = panel.find_obs(ids[i], m);
                if (!ob || ob->status == Status::missing || !std::isfinite(ob->ret)) continue;
                const int p = portfolios.assignments.at(ids[i]) - 1;
                sum_r[p] += ob->ret;
                ++nr[p];
            }
            auto& row = year.returns[m];
            row.assign(n_groups, std::nullopt);
            for (int p = 0; p < n_groups; ++p)
                if (nr[p] > 0) row[p] = sum_r[p] / nr[p];
        }
        out.years.push_back(std::move(year));
    }
    return out;
}

enum class Variant { a, b, c, d };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::a: return "A";
        case Variant::b: return "B";
        case Variant::c: return "C";
        case Variant::d: return "D";
    }
    return "?";
}

inline std::vector<Variant> all_variants() {
    return {Variant::a, Variant::b, Variant::c, Variant::d};
}

inline bool variant_has_beta_sq(Variant v) { return v == Variant::b || v == Variant::d; }
inline bool variant_has_s_bar(Variant v) { return v == Variant::c || v == Variant::d; }

struct CrossSectionRow {
    int portfolio = 0;
    MonthKey month;
    double mean_return = 0.0;
    double beta_lag = 0.0;
    double beta_sq_lag = 0.0;
    double s_lag = 0.0;
};

// Slope estimates for one month, indexed 0..3 = intercept, beta, beta^2,
// mean residual sd. Coefficients outside the variant are NaN; coefficients
// whose (secondary) column was dropped as dependent are 0.
struct MonthGammas {
    double g[4];
    double r_squared = 0.0;

    MonthGammas() {
        for (double& x : g) x = std::numeric_limits<double>::quiet_NaN();
    }
};

inline MonthGammas cross_section_month(const std::vector<CrossSectionRow>& rows, Variant v) {
    const std::size_t n = rows.size();
    const std::size_t k = 2 + (variant_has_beta_sq(v) ? 1 : 0) + (variant_has_s_bar(v) ? 1 : 0);
    DesignMatrix X;
    X.rows = n;
    X.cols = k;
    X.has_intercept = true;
    X.data.reserve(n * k);
    std::vector<double> y;
    y.reserve(n);
    for (const auto& row : rows) {
        X.data.push_back(1.0);
        X.data.push_back(row.beta_lag);
        if (variant_has_beta_sq(v)) X.data.push_back(row.beta_sq_lag);
        if (variant_has_s_bar(v)) X.data.push_back(row.s_lag);
        y.push_back(row.mean_return);
    }
    FitOptions opts;
    opts.droppable.assign(k, false);
    for (std::size_t j = 2; j < k; ++j) opts.droppable[j] = true;  // the core {1, beta} must hold
    const RegressionResult fit = ols_fit(X, y, opts);

    MonthGammas out;
    out.r_squared = fit.r_squared;
    out.g[0] = fit.coefficients[0];
    out.g[1] = fit.coefficients[1];
    std::size_t col = 2;
    if (variant_has_beta_sq(v)) out.g[2] = fit.coefficients[col++];
    if (variant_has_s_bar(v)) out.g[3] = fit.coefficients[col++];
    return out;
}

struct GammaAggregate {
    double mean = 0.0;
    double sd = 0.0;
    double t = 0.0;
    std::size_t n = 0;
    bool zero_dispersion = false;  // sd == 0; t is +-inf or NaN
};

inline GammaAggregate aggregate_series(std::span<const double> xs) {
    const SeriesStats st = series_stats(xs);
    return {st.mean, st.sd, st.t, st.n, st.sd == 0.0};
}

// One variant in one reporting window: per-coefficient aggregates, the
// intercept measured against the risk-free rate, and the mean monthly
// cross-sectional R^2.
struct VariantWindowReport {
    Variant variant = Variant::a;
    std::string window_label;
    std::optional<GammaAggregate> gamma[4];
    GammaAggregate gamma0_minus_rf;
    double mean_r_squared = 0.0;
    std::size_t months = 0;
};

// Aggregates a monthly gamma series over its window. The H4 comparison runs
// on the spread gamma0 - rf month by month.
inline VariantWindowReport aggregate_gammas(const std::map<MonthKey, MonthGammas>& series,
                                            const MonthlyPanel& panel, Variant v,
                                            const std::string& label) {
    if (series.empty()) raise(Errc::empty_series, "no monthly estimates for window " + label);
    VariantWindowReport rep;
    rep.variant = v;
    rep.window_label = label;
    rep.months = series.size();

    std::vector<double> col;
    col.reserve(series.size());
    for (int j = 0; j < 4; ++j) {
        col.clear();
        for (const auto& [m, g] : series)
            if (!std::isnan(g.g[j])) col.push_back(g.g[j]);
        if (!col.empty()) rep.gamma[j] = aggregate_series(col);
    }
    col.clear();
    for (const auto& [m, g] : series) col.push_back(g.g[0] - panel.monthly_rf(m));
    rep.gamma0_minus_rf = aggregate_series(col);

    double r2 = 0.0;
    for (const auto& [m, g] : series) r2 += g.r_squared;
    rep.mean_r_squared = r2 / static_cast<double>(series.size());
    return rep;
}

enum class Verdict { reject, fail_to_reject };

inline const char* verdict_name(Verdict v) {
    return v == Verdict::reject ? "reject" : "fail_to_reject";
}

struct HypothesisResult {
    std::string hypothesis;  // H1..H4
    Variant source = Variant::a;
    std::string window_label;
    double t = 0.0;
    bool one_sided = false;
    Verdict at_10 = Verdict::fail_to_reject;
    Verdict at_5 = Verdict::fail_to_reject;
    Verdict at_1 = Verdict::fail_to_reject;
};

namespace detail {

inline HypothesisResult make_verdict(const std::string& hyp, const VariantWindowReport& rep,
                                     double t, bool one_sided) {
    HypothesisResult h;
    h.hypothesis = hyp;
    h.source = rep.variant;
    h.window_label = rep.window_label;
    h.t = t;
    h.one_sided = one_sided;
    auto decide = [&](double z) {
        if (std::isnan(t)) return Verdict::fail_to_reject;
        const double stat = one_sided ? t : std::abs(t);
        return stat > z ? Verdict::reject : Verdict::fail_to_reject;
    };
    h.at_10 = decide(one_sided ? kZ90 : kZ95);
    h.at_5 = decide(one_sided ? kZ95 : kZ975);
    h.at_1 = decide(one_sided ? kZ99 : kZ995);
    return h;
}

}  // namespace detail

// H1: linearity, gamma2 = 0 (variants B, D). H2: no residual-risk pricing,
// gamma3 = 0 (C, D). H3: positive market premium, gamma1 > 0 one-sided
// (all). H4: intercept equals rf (all). Normal critical values; monthly
// gamma estimates are fat-tailed, so borderline calls are soft evidence.
inline std::vector<HypothesisResult> hypothesis_verdicts(
    const std::map<Variant, VariantWindowReport>& reports) {
    auto need = [&](Variant v) -> const VariantWindowReport& {
        auto it = reports.find(v);
        if (it == reports.end())
            raise(Errc::missing_variant, std::string("variant ") + variant_name(v) +
                                             " required for a hypothesis is absent");
        return it->second;
    };
    auto gamma_t = [](const VariantWindowReport& rep, int j) {
        if (!rep.gamma[j])
            raise(Errc::missing_variant, std::string("variant ") + variant_name(rep.variant) +
                                             " lacks gamma" + std::to_string(j));
        return rep.gamma[j]->t;
    };

    std::vector<HypothesisResult> out;
    for (Variant v : {Variant::b, Variant::d})
        if (reports.count(v))
            out.push_back(detail::make_verdict("H1", need(v), gamma_t(need(v), 2), false));
    for (Variant v : {Variant::c, Variant::d})
        if (reports.count(v))
            out.push_back(detail::make_verdict("H2", need(v), gamma_t(need(v), 3), false));
    for (Variant v : all_variants())
        if (reports.count(v))
            out.push_back(detail::make_verdict("H3", need(v), gamma_t(need(v), 1), true));
    for (Variant v : all_variants())
        if (reports.count(v))
            out.push_back(detail::make_verdict("H4", need(v), need(v).gamma0_minus_rf.t, false));
    if (out.empty()) raise(Errc::missing_variant, "no variant reports supplied");
    return out;
}

struct FMBOptions {
    int n_groups = 20;
    int min_obs = kDefaultMinBetaObs;
    unsigned jobs = 1;
};

struct SchemeRun {
    PeriodScheme scheme;
    BetaPortfolioSet portfolios;
    RollingEstimates rolling;
    // Per variant, the monthly cross-sectional estimates over the testing
    // window (months skipped when any portfolio lacks a return).
    std::map<Variant, std::map<MonthKey, MonthGammas>> gammas;
    std::vector<Diagnostic> diagnostics;
};

struct WindowReport {
    std::string label;
    std::map<Variant, VariantWindowReport> variants;
    std::vector<HypothesisResult> verdicts;
};

struct FMBRun {
    std::vector<SchemeRun> schemes;
    std::vector<WindowReport> windows;  // pooled first when several schemes
    std::vector<Diagnostic> diagnostics;
};

// Full two-pass driver. The eligible universe is the continuous-listing
// subset over the whole panel span; formation betas come from the formation
// window; rolling estimates and monthly cross-sections follow per scheme.
inline FMBRun run_fama_macbeth(const MonthlyPanel& panel, const MonthlySeries& market,
                               const std::vector<PeriodScheme>& schemes,
                               const FMBOptions& opts = {}) {
    if (schemes.empty()) raise(Errc::invalid_config, "at least one period scheme required");
    for (const auto& s : schemes) s.validate();

    FMBRun run;
    const std::vector<std::string> universe =
        continuous_listing_subset(panel, panel.span_first(), panel.span_last());

    for (const auto& scheme : schemes) {
        SchemeRun sr;
        sr.scheme = scheme;

        const MonthKey form_first{scheme.formation.first, 1};
        const MonthKey form_last{scheme.formation.last, 12};
        if (form_first < panel.span_first() || panel.span_last() < form_last)
            raise(Errc::window_out_of_span, "formation window " + form_first.str() + ".." +
                                                form_last.str() + " outside panel span");

        std::map<std::string, double> formation_betas;
        {
            std::vector<std::optional<double>> slot(universe.size());
            parallel_for(universe.size(), opts.jobs, [&](std::size_t i) {
                thread_local std::vector<double> ri, rm;
                detail::window_pairs(panel, market, universe[i], form_first, form_last, ri, rm);
                if (ri.size() < static_cast<std::size_t>(opts.min_obs)) return;
                slot[i] = market_model(ri, rm, opts.min_obs).beta;
            });
            for (std::size_t i = 0; i < universe.size(); ++i) {
                if (slot[i])
                    formation_betas[universe[i]] = *slot[i];
                else
                    sr.diagnostics.push_back({"TOO_FEW_OBS", universe[i],
                                              form_first.str() + ".." + form_last.str(),
                                              "dropped at formation"});
            }
        }
        sr.portfolios = form_beta_portfolios(formation_betas, opts.n_groups);
        sr.rolling = rolling_estimates(panel, market, scheme, sr.portfolios, opts.min_obs,
                                       opts.jobs);

        const int n_groups = static_cast<int>(sr.portfolios.sizes.size());
        for (const auto& year : sr.rolling.years) {
            bool regressors_ok = true;
            for (int p = 0; p < n_groups; ++p)
                if (!std::isfinite(year.beta[p])) regressors_ok = false;
            if (!regressors_ok) {
                sr.diagnostics.push_back({"SKIPPED_YEAR", "", std::to_string(year.testing_year),
                                          "empty portfolio regressors"});
                continue;
            }
            for (const auto& [m, rets] : year.returns) {
                bool complete = true;
                for (int p = 0; p < n_groups; ++p)
                    if (!rets[p]) complete = false;
                if (!complete) {
                    sr.diagnostics.push_back(
                        {"SKIPPED_MONTH", "", m.str(), "portfolio return missing"});
                    continue;
                }
                std::vector<CrossSectionRow> rows(n_groups);
                for (int p = 0; p < n_groups; ++p)
                    rows[p] = {p + 1, m, *rets[p], year.beta[p], year.beta_sq[p], year.s_bar[p]};
                for (Variant v : all_variants()) sr.gammas[v][m] = cross_section_month(rows, v);
            }
        }
        run.schemes.push_back(std::move(sr));
    }

    // Per-scheme windows, preceded by the pooled concatenation when more
    // than one scheme runs. Pooling requires disjoint testing months.
    std::map<Variant, std::map<MonthKey, MonthGammas>> pooled;
    if (run.schemes.size() > 1) {
        for (const auto& sr : run.schemes)
            for (const auto& [v, series] : sr.gammas)
                for (const auto& [m, g] : series)
                    if (!pooled[v].emplace(m, g).second)
                        raise(Errc::invalid_config,
                              "testing windows overlap at " + m.str() + "; cannot pool");
        int first = schemes.front().testing.first, last = schemes.front().testing.last;
        for (const auto& s : schemes) {
            first = std::min(first, s.testing.first);
            last = std::max(last, s.testing.last);
        }
        const std::string label = std::to_string(first) + "~" + std::to_string(last);
        WindowReport w;
        w.label = label;
        for (const auto& [v, series] : pooled)
            if (!series.empty()) w.variants.emplace(v, aggregate_gammas(series, panel, v, label));
        w.verdicts = hypothesis_verdicts(w.variants);
        run.windows.push_back(std::move(w));
    }
    for (const auto& sr : run.schemes) {
        WindowReport w;
        w.label = sr.scheme.testing_label();
        for (const auto& [v, series] : sr.gammas)
            if (!series.empty())
                w.variants.emplace(v, aggregate_gammas(series, panel, v, w.label));
        if (w.variants.empty())
            raise(Errc::empty_series, "no cross-sections produced for window " + w.label);
        w.verdicts = hypothesis_verdicts(w.variants);
        run.windows.push_back(std::move(w));
    }
    for (const auto& sr : run.schemes) {
        run.diagnostics.insert(run.diagnostics.end(), sr.diagnostics.begin(),
                               sr.diagnostics.end());
        run.diagnostics.insert(run.diagnostics.end(), sr.rolling.diagnostics.begin(),
                               sr.rolling.diagnostics.end());
    }
    return run;
}

}  // namespace factorkit
