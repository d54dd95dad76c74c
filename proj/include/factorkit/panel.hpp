#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "factorkit/errors.hpp"
#include "factorkit/month.hpp"

namespace factorkit {

enum class Status { normal, st, star_st, pt, missing };

inline const char* status_name(Status s) {
    switch (s) {
        case Status::normal: return "NORMAL";
        case Status::st: return "ST";
        case Status::star_st: return "STAR_ST";
        case Status::pt: return "PT";
        case Status::missing: return "";
    }
    return "";
}

// Empty string means MISSING (no trading record that month).
inline Status parse_status(const std::string& s) {
    if (s.empty()) return Status::missing;
    if (s == "NORMAL") return Status::normal;
    if (s == "ST") return Status::st;
    if (s == "STAR_ST") return Status::star_st;
    if (s == "PT") return Status::pt;
    raise(Errc::malformed_row, "unknown status '" + s + "'");
}

struct Obs {
    double ret = 0.0;         // monthly simple return, decimal fraction; NaN when MISSING
    double market_cap = 0.0;  // NaN when absent
    double float_cap = 0.0;   // NaN when absent
    Status status = Status::normal;

    friend bool operator==(const Obs& a, const Obs& b) {
        auto eq = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
        return eq(a.ret, b.ret) && eq(a.market_cap, b.market_cap) && eq(a.float_cap, b.float_cap) &&
               a.status == b.status;
    }
};

struct Fundamentals {
    double book_equity = 0.0;
    double year_end_market_value = 0.0;
    bool is_financial = false;

    friend bool operator==(const Fundamentals&, const Fundamentals&) = default;
};

struct Diagnostic {
    std::string code;
    std::string security_id;
    std::string context;  // month or fiscal year the finding refers to
    std::string detail;

    friend auto operator<=>(const Diagnostic&, const Diagnostic&) = default;
};

struct MonthlyPanel {
    std::map<std::string, std::map<MonthKey, Obs>> observations;
    std::map<std::string, std::map<int, Fundamentals>> fundamentals;
    std::map<MonthKey, double> risk_free;  // prevailing annual deposit rate per month

    friend bool operator==(const MonthlyPanel&, const MonthlyPanel&) = default;

    bool empty() const { return observations.empty(); }

    MonthKey span_first() const {
        MonthKey first{9999, 12};
        for (const auto& [id, months] : observations)
            if (!months.empty()) first = std::min(first, months.begin()->first);
        if (first.year == 9999) raise(Errc::empty_input, "panel has no observations");
        return first;
    }

    MonthKey span_last() const {
        MonthKey last{-9999, 1};
        for (const auto& [id, months] : observations)
            if (!months.empty()) last = std::max(last, months.rbegin()->first);
        if (last.year == -9999) raise(Errc::empty_input, "panel has no observations");
        return last;
    }

    double annual_rf(MonthKey m) const {
        auto it = risk_free.find(m);
        if (it == risk_free.end()) raise(Errc::riskfree_gap, "no risk-free rate for " + m.str());
        return it->second;
    }

    // Compounding-consistent conversion of the annual deposit rate.
    double monthly_rf(MonthKey m) const { return std::pow(1.0 + annual_rf(m), 1.0 / 12.0) - 1.0; }

    const Obs* find_obs(const std::string& id, MonthKey m) const {
        auto it = observations.find(id);
        if (it == observations.end()) return nullptr;
        auto jt = it->second.find(m);
        return jt == it->second.end() ? nullptr : &jt->second;
    }

    // Finite returns of trading months only; suitable for estimate_beta.
    std::map<MonthKey, double> return_series(const std::string& id) const {
        std::map<MonthKey, double> out;
        auto it = observations.find(id);
        if (it == observations.end()) return out;
        for (const auto& [m, obs] : it->second)
            if (obs.status != Status::missing && std::isfinite(obs.ret)) out[m] = obs.ret;
        return out;
    }
};

struct FilterRules {
    std::set<Status> drop_statuses;
    bool drop_negative_book_equity = false;
    bool drop_financials = false;
};

// Status rules remove the flagged months only; book-equity and financial
// rules remove the fiscal-year fundamentals record, which excludes the
// security from sorts keyed to that record while keeping its observations.
inline MonthlyPanel apply_exclusion_filters(const MonthlyPanel& panel, const FilterRules& rules) {
    MonthlyPanel out;
    out.risk_free = panel.risk_free;
    for (const auto& [id, months] : panel.observations) {
        std::map<MonthKey, Obs> kept;
        for (const auto& [m, obs] : months)
            if (!rules.drop_statuses.count(obs.status)) kept.emplace(m, obs);
        if (!kept.empty()) out.observations.emplace(id, std::move(kept));
    }
    for (const auto& [id, years] : panel.fundamentals) {
        std::map<int, Fundamentals> kept;
        for (const auto& [y, f] : years) {
            if (rules.drop_negative_book_equity && f.book_equity <= 0.0) continue;
            if (rules.drop_financials && f.is_financial) continue;
            kept.emplace(y, f);
        }
        if (!kept.empty()) out.fundamentals.emplace(id, std::move(kept));
    }
    return out;
}

// Securities with a trading record (non-MISSING observation) in every
// calendar year the window touches. Sporadic suspensions are tolerated.
inline std::vector<std::string> continuous_listing_subset(const MonthlyPanel& panel, MonthKey first,
                                                          MonthKey last) {
    if (last < first) raise(Errc::empty_window, first.str() + " .. " + last.str());
    if (first < panel.span_first() || panel.span_last() < last)
        raise(Errc::window_out_of_span,
              first.str() + " .. " + last.str() + " outside panel span " + panel.span_first().str() +
                  " .. " + panel.span_last().str());
    std::vector<std::string> out;
    for (const auto& [id, months] : panel.observations) {
        bool ok = true;
        for (int y = first.year; y <= last.year && ok; ++y) {
            const MonthKey lo = std::max(first, MonthKey{y, 1});
            const MonthKey hi = std::min(last, MonthKey{y, 12});
            bool seen = false;
            for (auto it = months.lower_bound(lo); it != months.end() && !(hi < it->first); ++it) {
                if (it->second.status != Status::missing && std::isfinite(it->second.ret)) {
                    seen = true;
                    break;
                }
            }
            ok = seen;
        }
        if (ok) out.push_back(id);
    }
    return out;  // map iteration order is already sorted
}

// Months May..December belong to the formation year that started that May;
// January..April still belong to the previous year's formation window.
inline int formation_year_of(MonthKey m) { return m.month >= 5 ? m.year : m.year - 1; }

inline MonthKey formation_window_first(int formation_year) { return MonthKey{formation_year, 5}; }
inline MonthKey formation_window_last(int formation_year) { return MonthKey{formation_year + 1, 4}; }

struct AlignedFundamentals {
    double book_equity = 0.0;
    double market_value = 0.0;
};

struct FiscalAlignment {
    int formation_year = 0;
    int fiscal_year = 0;  // formation_year - 1: books disclosed by that April
    std::map<std::string, AlignedFundamentals> values;
    std::vector<Diagnostic> diagnostics;
};

// Accounting data usable in a trading month: the fiscal year ending before
// the formation May, i.e. books already disclosed when membership was set.
inline FiscalAlignment fiscal_align(const MonthlyPanel& panel, MonthKey trading_month) {
    if (trading_month < panel.span_first() || panel.span_last() < trading_month)
        raise(Errc::window_out_of_span, trading_month.str() + " outside panel span");
    FiscalAlignment out;
    out.formation_year = formation_year_of(trading_month);
    out.fiscal_year = out.formation_year - 1;
    const MonthKey lo = std::max(panel.span_first(), formation_window_first(out.formation_year));
    const MonthKey hi = std::min(panel.span_last(), formation_window_last(out.formation_year));
    for (const auto& [id, months] : panel.observations) {
        bool active = false;
        for (auto it = months.lower_bound(lo); it != months.end() && !(hi < it->first); ++it) {
            if (it->second.status != Status::missing && std::isfinite(it->second.ret)) {
                active = true;
                break;
            }
        }
        if (!active) continue;
        auto fit = panel.fundamentals.find(id);
        const Fundamentals* rec = nullptr;
        if (fit != panel.fundamentals.end()) {
            auto yit = fit->second.find(out.fiscal_year);
            if (yit != fit->second.end()) rec = &yit->second;
        }
        if (rec == nullptr) {
            out.diagnostics.push_back({"NO_FUNDAMENTALS", id, std::to_string(out.fiscal_year),
                                       "no record for fiscal year " + std::to_string(out.fiscal_year)});
            continue;
        }
        out.values.emplace(id, AlignedFundamentals{rec->book_equity, rec->year_end_market_value});
    }
    return out;
}

}  // namespace factorkit
