#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "factorkit/errors.hpp"
#include "factorkit/month.hpp"
#include "factorkit/panel.hpp"
#include "factorkit/parallel.hpp"

namespace factorkit {

struct SnapshotEntry {
    double size = 0.0;  // fiscal t-1 year-end market value
    double beme = 0.0;  // fiscal t-1 book equity / market value, > 0

    friend bool operator==(const SnapshotEntry&, const SnapshotEntry&) = default;
};

// Sorting data frozen for the May t .. April t+1 holding window.
struct FormationSnapshot {
    int formation_year = 0;
    std::map<std::string, SnapshotEntry> entries;
    std::vector<Diagnostic> diagnostics;
};

// Universe: securities trading inside the formation window that carry the
// prior fiscal year's books with positive book equity.
inline FormationSnapshot build_snapshot(const MonthlyPanel& panel, int formation_year) {
    FormationSnapshot out;
    out.formation_year = formation_year;
    const int fiscal_year = formation_year - 1;
    const MonthKey lo = std::max(panel.span_first(), formation_window_first(formation_year));
    const MonthKey hi = std::min(panel.span_last(), formation_window_last(formation_year));
    for (const auto& [id, months] : panel.observations) {
        bool active = false;
        for (auto it = months.lower_bound(lo); it != months.end() && !(hi < it->first); ++it) {
            if (it->second.status != Status::missing && std::isfinite(it->second.ret)) {
                active = true;
                break;
            }
        }
        if (!active) continue;
        const Fundamentals* rec = nullptr;
        auto fit = panel.fundamentals.find(id);
        if (fit != panel.fundamentals.end()) {
            auto yit = fit->second.find(fiscal_year);
            if (yit != fit->second.end()) rec = &yit->second;
        }
        if (rec == nullptr) {
            out.diagnostics.push_back({"NO_FUNDAMENTALS", id, std::to_string(fiscal_year),
                                       "no record for fiscal year " + std::to_string(fiscal_year)});
            continue;
        }
        if (!(rec->book_equity > 0.0)) {
            out.diagnostics.push_back({"NONPOSITIVE_BOOK_EQUITY", id, std::to_string(fiscal_year),
                                       "book equity not positive; no BE/ME"});
            continue;
        }
        out.entries.emplace(id, SnapshotEntry{rec->year_end_market_value,
                                              rec->book_equity / rec->year_end_market_value});
    }
    if (out.entries.empty())
        raise(Errc::empty_snapshot, "no eligible securities for formation year " +
                                        std::to_string(formation_year));
    return out;
}

// Breakpoint for fraction q: the value at rank ceil(qN) of the ascending
// sort, 1-indexed. Group membership below uses v <= breakpoint. The small
// slack keeps exact products (0.2 * 25) from ceiling one rank too high.
inline double breakpoint(const std::vector<double>& sorted_ascending, double q) {
    const std::size_t n = sorted_ascending.size();
    if (n == 0) raise(Errc::degenerate_breakpoints, "no values");
    std::size_t rank =
        static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted_ascending[rank - 1];
}

enum class SortScheme { two_by_three, five_by_five };

inline const char* sort_scheme_name(SortScheme s) {
    return s == SortScheme::two_by_three ? "TWO_BY_THREE" : "FIVE_BY_FIVE";
}

struct CellRef {
    int size_q = 1;  // 1-based; 2x3: 1 = S, 2 = B
    int beme_q = 1;  // 2x3: 1 = L, 2 = M, 3 = H

    friend auto operator<=>(const CellRef&, const CellRef&) = default;
};

inline std::string cell_label(SortScheme scheme, CellRef c) {
    if (scheme == SortScheme::two_by_three) {
        static const char* size_names[] = {"S", "B"};
        static const char* beme_names[] = {"L", "M", "H"};
        return std::string(size_names[c.size_q - 1]) + "/" + beme_names[c.beme_q - 1];
    }
    return std::to_string(c.size_q) + "/" + std::to_string(c.beme_q);
}

struct CellAssignment {
    SortScheme scheme = SortScheme::two_by_three;
    int formation_year = 0;
    std::map<std::string, CellRef> cells;
};

namespace detail {

inline std::vector<double> sorted_values(const FormationSnapshot& snap, bool beme) {
    std::vector<double> v;
    v.reserve(snap.entries.size());
    for (const auto& [id, e] : snap.entries) v.push_back(beme ? e.beme : e.size);
    std::sort(v.begin(), v.end());
    if (v.front() == v.back())
        raise(Errc::degenerate_breakpoints,
              std::string(beme ? "book-to-market" : "size") + " values are all equal in year " +
                  std::to_string(snap.formation_year));
    return v;
}

}  // namespace detail

// Size: at or below the median is S. Value: bottom 30% is L, top 30% is H.
inline CellAssignment assign_2x3(const FormationSnapshot& snap) {
    if (snap.entries.size() < 6)
        raise(Errc::too_few_securities,
              std::to_string(snap.entries.size()) + " securities, need 6 for the 2x3 sort");
    const auto sizes = detail::sorted_values(snap, false);
    const auto bemes = detail::sorted_values(snap, true);
    const double med = breakpoint(sizes, 0.5);
    const double b30 = breakpoint(bemes, 0.3);
    const double b70 = breakpoint(bemes, 0.7);
    CellAssignment out;
    out.scheme = SortScheme::two_by_three;
    out.formation_year = snap.formation_year;
    for (const auto& [id, e] : snap.entries) {
        CellRef c;
        c.size_q = e.size <= med ? 1 : 2;
        c.beme_q = e.beme <= b30 ? 1 : (e.beme <= b70 ? 2 : 3);
        out.cells.emplace(id, c);
    }
    return out;
}

inline CellAssignment assign_5x5(const FormationSnapshot& snap) {
    if (snap.entries.size() < 25)
        raise(Errc::too_few_securities,
              std::to_string(snap.entries.size()) + " securities, need 25 for the 5x5 sort");
    const auto sizes = detail::sorted_values(snap, false);
    const auto bemes = detail::sorted_values(snap, true);
    double size_bp[4], beme_bp[4];
    for (int i = 0; i < 4; ++i) {
        size_bp[i] = breakpoint(sizes, 0.2 * (i + 1));
        beme_bp[i] = breakpoint(bemes, 0.2 * (i + 1));
    }
    auto quintile = [](const double bp[4], double v) {
        for (int i = 0; i < 4; ++i)
            if (v <= bp[i]) return i + 1;
        return 5;
    };
    CellAssignment out;
    out.scheme = SortScheme::five_by_five;
    out.formation_year = snap.formation_year;
    for (const auto& [id, e] : snap.entries)
        out.cells.emplace(id, CellRef{quintile(size_bp, e.size), quintile(beme_bp, e.beme)});
    return out;
}

// Weighted mean member return for the month, weight = float cap at the end
// of the prior month. Members lacking either value drop out for the month.
inline std::optional<double> try_value_weighted_return(const MonthlyPanel& panel,
                                                       const std::vector<std::string>& members,
                                                       MonthKey month,
                                                       std::vector<Diagnostic>* diags = nullptr) {
    const MonthKey prior = month.plus_months(-1);
    double wsum = 0.0, wr = 0.0;
    for (const auto& id : members) {
        const Obs* cur = panel.find_obs(id, month);
        const Obs* prev = panel.find_obs(id, prior);
        const bool has_ret = cur && cur->status != Status::missing && std::isfinite(cur->ret);
        const bool has_w = prev && std::isfinite(prev->float_cap) && prev->float_cap >= 0.0;
        if (!has_ret || !has_w) {
            if (diags)
                diags->push_back({"MEMBER_SKIPPED", id, month.str(),
                                  !has_ret ? "no return this month" : "no prior-month float cap"});
            continue;
        }
        wsum += prev->float_cap;
        wr += prev->float_cap * cur->ret;
    }
    if (!(wsum > 0.0)) return std::nullopt;
    return wr / wsum;
}

inline double value_weighted_return(const MonthlyPanel& panel, const std::vector<std::string>& members,
                                    MonthKey month, std::vector<Diagnostic>* diags = nullptr) {
    auto v = try_value_weighted_return(panel, members, month, diags);
    if (!v) raise(Errc::empty_cell_month, "no weighted members in " + month.str());
    return *v;
}

// Six cell returns of one month, indexed [size 0=S,1=B][beme 0=L,1=M,2=H].
struct CellReturns2x3 {
    std::optional<double> r[2][3];
};

inline double compute_smb(const CellReturns2x3& c) {
    for (int s = 0; s < 2; ++s)
        for (int b = 0; b < 3; ++b)
            if (!c.r[s][b])
                raise(Errc::missing_cell, "cell " + cell_label(SortScheme::two_by_three,
                                                               CellRef{s + 1, b + 1}) + " undefined");
    return (*c.r[0][0] + *c.r[0][1] + *c.r[0][2]) / 3.0 -
           (*c.r[1][0] + *c.r[1][1] + *c.r[1][2]) / 3.0;
}

inline double compute_hml(const CellReturns2x3& c) {
    for (int s = 0; s < 2; ++s)
        for (int b : {0, 2})
            if (!c.r[s][b])
                raise(Errc::missing_cell, "cell " + cell_label(SortScheme::two_by_three,
                                                               CellRef{s + 1, b + 1}) + " undefined");
    return (*c.r[0][2] + *c.r[1][2]) / 2.0 - (*c.r[0][0] + *c.r[1][0]) / 2.0;
}

// Float-cap-weighted universe return minus the monthly risk-free rate.
inline double market_factor(const MonthlyPanel& panel, MonthKey month,
                            const std::vector<std::string>* universe = nullptr) {
    std::vector<std::string> all;
    if (universe == nullptr) {
        all.reserve(panel.observations.size());
        for (const auto& [id, months] : panel.observations) all.push_back(id);
        universe = &all;
    }
    auto v = try_value_weighted_return(panel, *universe, month);
    if (!v) raise(Errc::empty_universe, "no weighted universe members in " + month.str());
    return *v - panel.monthly_rf(month);
}

// Drops the floor(fraction * N) smallest securities by size, ties broken by
// id, before any breakpoints are computed.
inline FormationSnapshot shell_filter(const FormationSnapshot& snap, double fraction) {
    if (!(fraction >= 0.0) || fraction >= 1.0)
        raise(Errc::invalid_config, "shell fraction must be in [0, 1)");
    FormationSnapshot out;
    out.formation_year = snap.formation_year;
    out.diagnostics = snap.diagnostics;
    const std::size_t drop = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(snap.entries.size())));
    if (drop == 0) {
        out.entries = snap.entries;
        return out;
    }
    std::vector<std::pair<double, std::string>> order;
    order.reserve(snap.entries.size());
    for (const auto& [id, e] : snap.entries) order.emplace_back(e.size, id);
    std::sort(order.begin(), order.end());
    for (std::size_t i = drop; i < order.size(); ++i)
        out.entries.emplace(order[i].second, snap.entries.at(order[i].second));
    return out;
}

// Prepared per-formation-year sorts for a study run. Years whose snapshot
// cannot be built are absent, with a diagnostic.
struct SnapshotTable {
    std::map<int, FormationSnapshot> snapshots;
    std::map<int, CellAssignment> cells23;
    std::map<int, CellAssignment> cells55;
    std::vector<Diagnostic> diagnostics;
};

inline SnapshotTable build_snapshot_table(const MonthlyPanel& panel, double shell_fraction = 0.0) {
    SnapshotTable out;
    const MonthKey first = panel.span_first(), last = panel.span_last();
    for (int t = formation_year_of(first); t <= formation_year_of(last); ++t) {
        if (formation_window_last(t) < first || last < formation_window_first(t)) continue;
        FormationSnapshot snap;
        try {
            snap = build_snapshot(panel, t);
            if (shell_fraction > 0.0) snap = shell_filter(snap, shell_fraction);
            out.cells23.emplace(t, assign_2x3(snap));
            out.cells55.emplace(t, assign_5x5(snap));
        } catch (const Error& e) {
            out.diagnostics.push_back({errc_name(e.code()), "", std::to_string(t), e.what()});
            out.cells23.erase(t);
            out.cells55.erase(t);
            continue;
        }
        for (const auto& d : snap.diagnostics) out.diagnostics.push_back(d);
        out.snapshots.emplace(t, std::move(snap));
    }
    return out;
}

struct FactorObservation {
    double mkt_excess = 0.0;
    double smb = 0.0;
    double hml = 0.0;

    friend bool operator==(const FactorObservation&, const FactorObservation&) = default;
};

struct FactorSeries {
    std::map<MonthKey, FactorObservation> months;
    std::vector<Diagnostic> diagnostics;
};

namespace detail {

inline std::map<CellRef, std::vector<std::string>> members_by_cell(const CellAssignment& a) {
    std::map<CellRef, std::vector<std::string>> out;
    for (const auto& [id, cell] : a.cells) out[cell].push_back(id);
    return out;
}

inline std::vector<MonthKey> factor_months(const MonthlyPanel& panel, const SnapshotTable& table) {
    std::vector<MonthKey> out;
    const MonthKey first = panel.span_first(), last = panel.span_last();
    for (MonthKey m = first.plus_months(1); !(last < m); m = m.plus_months(1))
        if (table.snapshots.count(formation_year_of(m))) out.push_back(m);
    return out;
}

}  // namespace detail

// SMB, HML, and the market factor for every month covered by a snapshot.
// Months with an empty 2x3 cell are skipped and logged. Workers fill
// preassigned slots, so the result is identical at any parallelism.
inline FactorSeries build_factor_series(const MonthlyPanel& panel, const SnapshotTable& table,
                                        unsigned jobs = 1) {
    FactorSeries out;
    const auto months = detail::factor_months(panel, table);
    std::map<int, std::map<CellRef, std::vector<std::string>>> members;
    std::map<int, std::vector<std::string>> universe;
    for (const auto& [t, a] : table.cells23) {
        members[t] = detail::members_by_cell(a);
        auto& ids = universe[t];
        ids.reserve(a.cells.size());
        for (const auto& [id, cell] : a.cells) ids.push_back(id);
    }
    std::vector<std::optional<FactorObservation>> slots(months.size());
    std::vector<std::vector<Diagnostic>> diag_slots(months.size());
    parallel_for(months.size(), jobs, [&](std::size_t i) {
        const MonthKey m = months[i];
        const int t = formation_year_of(m);
        const auto& cells = members.at(t);
        CellReturns2x3 r;
        bool complete = true;
        for (int s = 0; s < 2 && complete; ++s)
            for (int b = 0; b < 3; ++b) {
                auto it = cells.find(CellRef{s + 1, b + 1});
                std::optional<double> v;
                if (it != cells.end()) v = try_value_weighted_return(panel, it->second, m);
                if (!v) {
                    diag_slots[i].push_back({"EMPTY_CELL_MONTH", "", m.str(),
                                             "2x3 cell " + cell_label(SortScheme::two_by_three,
                                                                      CellRef{s + 1, b + 1}) +
                                                 " has no weighted members"});
                    complete = false;
                    break;
                }
                r.r[s][b] = v;
            }
        if (!complete) return;
        FactorObservation obs;
        obs.smb = compute_smb(r);
        obs.hml = compute_hml(r);
        obs.mkt_excess = market_factor(panel, m, &universe.at(t));
        slots[i] = obs;
    });
    for (std::size_t i = 0; i < months.size(); ++i) {
        if (slots[i]) out.months.emplace(months[i], *slots[i]);
        for (auto& d : diag_slots[i]) out.diagnostics.push_back(std::move(d));
    }
    return out;
}

struct PortfolioSeries {
    std::map<CellRef, std::map<MonthKey, double>> excess;  // 25 value-weighted excess-return series
    std::vector<Diagnostic> diagnostics;
};

inline PortfolioSeries build_portfolio_series(const MonthlyPanel& panel, const SnapshotTable& table,
                                              unsigned jobs = 1) {
    PortfolioSeries out;
    const auto months = detail::factor_months(panel, table);
    std::map<int, std::map<CellRef, std::vector<std::string>>> members;
    for (const auto& [t, a] : table.cells55) members[t] = detail::members_by_cell(a);
    struct MonthRow {
        std::vector<std::pair<CellRef, double>> values;
        std::vector<Diagnostic> diags;
    };
    std::vector<MonthRow> slots(months.size());
    parallel_for(months.size(), jobs, [&](std::size_t i) {
        const MonthKey m = months[i];
        const double rf = panel.monthly_rf(m);
        const auto& cells = members.at(formation_year_of(m));
        for (int s = 1; s <= 5; ++s)
            for (int b = 1; b <= 5; ++b) {
                const CellRef cell{s, b};
                auto it = cells.find(cell);
                std::optional<double> v;
                if (it != cells.end()) v = try_value_weighted_return(panel, it->second, m);
                if (v)
                    slots[i].values.emplace_back(cell, *v - rf);
                else
                    slots[i].diags.push_back({"EMPTY_CELL_MONTH", "", m.str(),
                                              "5x5 cell " + cell_label(SortScheme::five_by_five, cell) +
                                                  " has no weighted members"});
            }
    });
    for (std::size_t i = 0; i < months.size(); ++i) {
        for (auto& [cell, v] : slots[i].values) out.excess[cell].emplace(months[i], v);
        for (auto& d : slots[i].diags) out.diagnostics.push_back(std::move(d));
    }
    return out;
}

}  // namespace factorkit
