#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "factorkit/csv.hpp"
#include "factorkit/errors.hpp"
#include "factorkit/panel.hpp"

namespace factorkit {

inline constexpr const char* kReturnsHeader =
    "security_id,year,month,return,market_cap,float_cap,status";
inline constexpr const char* kFundamentalsHeader =
    "security_id,fiscal_year,book_equity,year_end_market_value,is_financial";
inline constexpr const char* kRiskfreeHeader = "year,month,annual_rate";
inline constexpr const char* kMarketHeader = "year,month,return";
inline constexpr const char* kDiagnosticsHeader = "code,security_id,context,detail";

struct LoadResult {
    MonthlyPanel panel;
    std::vector<Diagnostic> diagnostics;
    std::optional<Errc> first_error;

    bool ok() const { return diagnostics.empty(); }
};

namespace detail {

inline void note(LoadResult& r, Errc code, std::string id, std::string context, std::string detail) {
    if (!r.first_error) r.first_error = code;
    r.diagnostics.push_back({errc_name(code), std::move(id), std::move(context), std::move(detail)});
}

inline std::optional<double> parse_optional_cap(const std::string& field, const char* what,
                                                std::string& err) {
    if (field.empty()) return std::nullopt;
    double v;
    if (!csv::try_parse_double(field, v) || !std::isfinite(v)) {
        err = std::string("unparseable ") + what + " '" + field + "'";
        return std::nullopt;
    }
    if (v < 0.0) {
        err = std::string(what) + " is negative";
        return std::nullopt;
    }
    return v;
}

inline std::string line_tag(const std::string& file, std::size_t line_no) {
    return file + ":" + std::to_string(line_no);
}

}  // namespace detail

// Parses all three inputs, collecting every problem instead of stopping at
// the first. The panel is usable only when diagnostics are empty.
inline LoadResult load_panel_checked(const std::string& returns_file,
                                     const std::string& fundamentals_file,
                                     const std::string& riskfree_file) {
    LoadResult r;
    const auto base = [](const std::string& p) {
        auto pos = p.find_last_of('/');
        return pos == std::string::npos ? p : p.substr(pos + 1);
    };

    try {
        auto rows = csv::read_table(returns_file, kReturnsHeader);
        const std::string tag = base(returns_file);
        for (const auto& row : rows) {
            const auto& f = row.fields;
            const std::string ctx = detail::line_tag(tag, row.line_no);
            if (f.size() != 7) {
                detail::note(r, Errc::malformed_row, f.empty() ? "" : f[0], ctx,
                             "expected 7 fields, got " + std::to_string(f.size()));
                continue;
            }
            if (f[0].empty()) {
                detail::note(r, Errc::malformed_row, "", ctx, "empty security_id");
                continue;
            }
            int year, month;
            if (!csv::try_parse_int(f[1], year) || !csv::try_parse_int(f[2], month) ||
                !valid_month_number(month)) {
                detail::note(r, Errc::malformed_row, f[0], ctx, "bad year/month");
                continue;
            }
            Obs obs;
            std::string err;
            try {
                obs.status = parse_status(f[6]);
            } catch (const Error& e) {
                detail::note(r, Errc::malformed_row, f[0], ctx, e.what());
                continue;
            }
            if (f[3].empty()) {
                obs.ret = std::numeric_limits<double>::quiet_NaN();
            } else if (!csv::try_parse_double(f[3], obs.ret)) {
                detail::note(r, Errc::malformed_row, f[0], ctx, "unparseable return '" + f[3] + "'");
                continue;
            }
            if (obs.status != Status::missing && !std::isfinite(obs.ret)) {
                detail::note(r, Errc::malformed_row, f[0], ctx,
                             "non-finite return with status " + std::string(status_name(obs.status)));
                continue;
            }
            auto mc = detail::parse_optional_cap(f[4], "market_cap", err);
            if (!err.empty()) {
                detail::note(r, Errc::malformed_row, f[0], ctx, err);
                continue;
            }
            auto fc = detail::parse_optional_cap(f[5], "float_cap", err);
            if (!err.empty()) {
                detail::note(r, Errc::malformed_row, f[0], ctx, err);
                continue;
            }
            obs.market_cap = mc.value_or(std::numeric_limits<double>::quiet_NaN());
            obs.float_cap = fc.value_or(std::numeric_limits<double>::quiet_NaN());
            if (mc && fc && *fc > *mc) {
                detail::note(r, Errc::malformed_row, f[0], ctx, "float_cap exceeds market_cap");
                continue;
            }
            const MonthKey mk{year, month};
            auto [it, inserted] = r.panel.observations[f[0]].emplace(mk, obs);
            if (!inserted)
                detail::note(r, Errc::duplicate_key, f[0], mk.str(),
                             "second observation row for this security and month");
        }
    } catch (const Error& e) {
        detail::note(r, e.code() == Errc::io_error ? Errc::io_error : Errc::malformed_row, "",
                     base(returns_file), e.what());
    }

    try {
        auto rows = csv::read_table(fundamentals_file, kFundamentalsHeader);
        const std::string tag = base(fundamentals_file);
        for (const auto& row : rows) {
            const auto& f = row.fields;
            const std::string ctx = detail::line_tag(tag, row.line_no);
            if (f.size() != 5) {
                detail::note(r, Errc::malformed_row, f.empty() ? "" : f[0], ctx,
                             "expected 5 fields, got " + std::to_string(f.size()));
                continue;
            }
            int fy;
            Fundamentals rec;
            if (f[0].empty() || !csv::try_parse_int(f[1], fy)) {
                detail::note(r, Errc::malformed_row, f[0], ctx, "bad security_id/fiscal_year");
                continue;
            }
            if (!csv::try_parse_double(f[2], rec.book_equity) || !std::isfinite(rec.book_equity)) {
                detail::note(r, Errc::malformed_row, f[0], ctx, "unparseable book_equity");
                continue;
            }
            if (!csv::try_parse_double(f[3], rec.year_end_market_value) ||
                !(rec.year_end_market_value > 0.0)) {
                detail::note(r, Errc::malformed_row, f[0], ctx, "year_end_market_value must be > 0");
                continue;
            }
            if (f[4] == "0" || f[4] == "false")
                rec.is_financial = false;
            else if (f[4] == "1" || f[4] == "true")
                rec.is_financial = true;
            else {
                detail::note(r, Errc::malformed_row, f[0], ctx, "bad is_financial flag '" + f[4] + "'");
                continue;
            }
            auto [it, inserted] = r.panel.fundamentals[f[0]].emplace(fy, rec);
            if (!inserted)
                detail::note(r, Errc::duplicate_key, f[0], std::to_string(fy),
                             "second fundamentals row for this security and fiscal year");
        }
    } catch (const Error& e) {
        detail::note(r, e.code() == Errc::io_error ? Errc::io_error : Errc::malformed_row, "",
                     base(fundamentals_file), e.what());
    }

    try {
        auto rows = csv::read_table(riskfree_file, kRiskfreeHeader);
        const std::string tag = base(riskfree_file);
        for (const auto& row : rows) {
            const auto& f = row.fields;
            const std::string ctx = detail::line_tag(tag, row.line_no);
            if (f.size() != 3) {
                detail::note(r, Errc::malformed_row, "", ctx,
                             "expected 3 fields, got " + std::to_string(f.size()));
                continue;
            }
            int year, month;
            double rate;
            if (!csv::try_parse_int(f[0], year) || !csv::try_parse_int(f[1], month) ||
                !valid_month_number(month)) {
                detail::note(r, Errc::malformed_row, "", ctx, "bad year/month");
                continue;
            }
            if (!csv::try_parse_double(f[2], rate) || !std::isfinite(rate) || rate <= -1.0) {
                detail::note(r, Errc::malformed_row, "", ctx, "bad annual_rate '" + f[2] + "'");
                continue;
            }
            const MonthKey mk{year, month};
            auto [it, inserted] = r.panel.risk_free.emplace(mk, rate);
            if (!inserted)
                detail::note(r, Errc::duplicate_key, "", mk.str(), "second risk-free row for this month");
        }
    } catch (const Error& e) {
        detail::note(r, e.code() == Errc::io_error ? Errc::io_error : Errc::malformed_row, "",
                     base(riskfree_file), e.what());
    }

    if (r.panel.observations.empty()) {
        detail::note(r, Errc::empty_input, "", base(returns_file), "no observation rows");
    } else {
        for (MonthKey m = r.panel.span_first(); !(r.panel.span_last() < m); m = m.plus_months(1))
            if (!r.panel.risk_free.count(m))
                detail::note(r, Errc::riskfree_gap, "", m.str(), "span month lacks a risk-free rate");
    }

    std::sort(r.diagnostics.begin(), r.diagnostics.end());
    return r;
}

inline MonthlyPanel load_panel(const std::string& returns_file, const std::string& fundamentals_file,
                               const std::string& riskfree_file) {
    auto r = load_panel_checked(returns_file, fundamentals_file, riskfree_file);
    if (r.first_error) {
        const auto& d = r.diagnostics.front();
        raise(*r.first_error, d.code + " " + d.security_id + " " + d.context + ": " + d.detail);
    }
    return std::move(r.panel);
}

namespace detail {

inline std::string opt_num(double v) { return std::isnan(v) ? std::string() : csv::format_double(v); }

}  // namespace detail

// Canonical serialization: securities ascending, months ascending. Loading
// what this writes reproduces the panel, and rewriting reproduces the bytes.
inline void write_panel(const MonthlyPanel& panel, const std::string& returns_file,
                        const std::string& fundamentals_file, const std::string& riskfree_file) {
    std::string out = std::string(kReturnsHeader) + "\n";
    for (const auto& [id, months] : panel.observations)
        for (const auto& [m, obs] : months)
            out += id + "," + std::to_string(m.year) + "," + std::to_string(m.month) + "," +
                   detail::opt_num(obs.ret) + "," + detail::opt_num(obs.market_cap) + "," +
                   detail::opt_num(obs.float_cap) + "," + status_name(obs.status) + "\n";
    csv::write_file(returns_file, out);

    out = std::string(kFundamentalsHeader) + "\n";
    for (const auto& [id, years] : panel.fundamentals)
        for (const auto& [y, f] : years)
            out += id + "," + std::to_string(y) + "," + csv::format_double(f.book_equity) + "," +
                   csv::format_double(f.year_end_market_value) + "," + (f.is_financial ? "1" : "0") +
                   "\n";
    csv::write_file(fundamentals_file, out);

    out = std::string(kRiskfreeHeader) + "\n";
    for (const auto& [m, rate] : panel.risk_free)
        out += std::to_string(m.year) + "," + std::to_string(m.month) + "," +
               csv::format_double(rate) + "\n";
    csv::write_file(riskfree_file, out);
}

inline std::map<MonthKey, double> load_market_series(const std::string& path) {
    std::map<MonthKey, double> out;
    auto rows = csv::read_table(path, kMarketHeader);
    const auto tag = path;
    for (const auto& row : rows) {
        const auto& f = row.fields;
        if (f.size() != 3) raise(Errc::malformed_row, tag + ":" + std::to_string(row.line_no));
        int year, month;
        double ret;
        if (!csv::try_parse_int(f[0], year) || !csv::try_parse_int(f[1], month) ||
            !valid_month_number(month) || !csv::try_parse_double(f[2], ret) || !std::isfinite(ret))
            raise(Errc::malformed_row, tag + ":" + std::to_string(row.line_no));
        if (!out.emplace(MonthKey{year, month}, ret).second)
            raise(Errc::duplicate_key, "market return repeated for " + MonthKey{year, month}.str());
    }
    if (out.empty()) raise(Errc::empty_input, tag + " has no rows");
    return out;
}

inline void write_market_series(const std::map<MonthKey, double>& series, const std::string& path) {
    std::string out = std::string(kMarketHeader) + "\n";
    for (const auto& [m, ret] : series)
        out += std::to_string(m.year) + "," + std::to_string(m.month) + "," +
               csv::format_double(ret) + "\n";
    csv::write_file(path, out);
}

inline void write_diagnostics(const std::vector<Diagnostic>& diagnostics, const std::string& path) {
    auto sorted = diagnostics;
    std::sort(sorted.begin(), sorted.end());
    std::string out = std::string(kDiagnosticsHeader) + "\n";
    for (const auto& d : sorted)
        out += d.code + "," + d.security_id + "," + d.context + "," + d.detail + "\n";
    csv::write_file(path, out);
}

}  // namespace factorkit
