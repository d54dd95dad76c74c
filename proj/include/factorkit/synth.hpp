#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "factorkit/errors.hpp"
#include "factorkit/month.hpp"
#include "factorkit/panel.hpp"
#include "factorkit/panel_io.hpp"
#include "factorkit/rng.hpp"

namespace factorkit {

struct ValueRange {
    double lo = 0.0;
    double hi = 0.0;
};

// Everything the generator consumes. The seed fully determines the output:
// draws happen in a documented order (see detail::generate_market) on a
// single xoshiro256** stream, so equal configs give bit-identical markets.
struct DgpConfig {
    int n_securities = 100;
    int months = 120;
    std::uint64_t seed = 1;
    int start_year = 2000;
    int start_month = 1;

    double market_mean = 0.008;  // monthly market return
    double market_sd = 0.04;
    double rf_annual = 0.02;

    ValueRange beta{0.4, 1.6};
    ValueRange smb_loading{-0.5, 1.5};
    ValueRange hml_loading{-0.5, 0.5};
    ValueRange idio_sd{0.0, 0.0};

    double size_premium = 0.002;  // latent SMB mean
    double value_premium = 0.003; // latent HML mean
    double smb_sd = 0.02;
    double hml_sd = 0.02;

    double size_log_mean = 4.0;
    double size_log_sd = 1.0;
    double beme_log_mean = 0.0;
    double beme_log_sd = 0.7;

    double contamination_sd = 0.0;  // extra noise for the bottom size decile
    double cap_jitter_sd = 0.0;     // monthly log jitter on market caps
    bool aligned_loadings = false;  // b = 1, s/h snapped to sort-group values

    void validate() const {
        auto need = [](bool ok, const std::string& what) {
            if (!ok) raise(Errc::invalid_config, what);
        };
        need(n_securities > 0, "n_securities must be positive");
        need(months > 0, "months must be positive");
        need(valid_month_number(start_month), "start_month must be 1..12");
        need(market_sd >= 0.0, "market_sd must be nonnegative");
        need(rf_annual > -1.0, "rf_annual must exceed -1");
        for (const auto* r : {&beta, &smb_loading, &hml_loading, &idio_sd})
            need(r->lo <= r->hi, "range lower bound exceeds upper bound");
        need(idio_sd.lo >= 0.0, "idio_sd must be nonnegative");
        need(smb_sd >= 0.0 && hml_sd >= 0.0, "factor sds must be nonnegative");
        need(size_log_sd >= 0.0 && beme_log_sd >= 0.0, "log sds must be nonnegative");
        need(contamination_sd >= 0.0, "contamination_sd must be nonnegative");
        need(cap_jitter_sd >= 0.0, "cap_jitter_sd must be nonnegative");
    }
};

struct SecurityTruth {
    double beta = 0.0;
    double smb_loading = 0.0;
    double hml_loading = 0.0;
    double idio_sd = 0.0;  // effective, including contamination
    double size = 0.0;
    double beme = 0.0;

    friend bool operator==(const SecurityTruth&, const SecurityTruth&) = default;
};

struct MonthTruth {
    double mkt_ret = 0.0;  // raw market return
    double smb = 0.0;      // latent factor returns
    double hml = 0.0;
    double rf_monthly = 0.0;

    friend bool operator==(const MonthTruth&, const MonthTruth&) = default;
};

struct TruthManifest {
    std::map<std::string, SecurityTruth> securities;
    std::map<MonthKey, MonthTruth> factors;
    double market_mean = 0.0;
    double size_premium = 0.0;
    double value_premium = 0.0;
    // Stored draws so the panel can be reproduced bit for bit.
    std::map<std::string, std::map<MonthKey, double>> noise;

    friend bool operator==(const TruthManifest&, const TruthManifest&) = default;
};

struct SyntheticMarket {
    MonthlyPanel panel;
    TruthManifest manifest;

    friend bool operator==(const SyntheticMarket&, const SyntheticMarket&) = default;
};

namespace detail {

// The one return formula: r = rf + b(mkt - rf) + s * smb + h * hml + eps,
// evaluated strictly left to right. Reconstruction must follow the same
// expression to land on identical bits.
inline double model_return(double rf, const SecurityTruth& sec, const MonthTruth& f, double eps) {
    return rf + sec.beta * (f.mkt_ret - rf) + sec.smb_loading * f.smb +
           sec.hml_loading * f.hml + eps;
}

// Draw order per seed: (1) per security, in id order: beta, smb loading,
// hml loading, idio sd (uniform in range), then size and beme (log-normal);
// (2) per month, in time order: market return, then for the three-factor
// mode the latent SMB and HML; (3) month-major noise and cap jitter per
// security in id order, drawn only when the respective sd is positive.
inline SyntheticMarket generate_market(const DgpConfig& cfg, bool three_factor) {
    cfg.validate();
    Rng rng(cfg.seed);
    SyntheticMarket out;
    TruthManifest& man = out.manifest;
    man.market_mean = cfg.market_mean;
    man.size_premium = three_factor ? cfg.size_premium : 0.0;
    man.value_premium = three_factor ? cfg.value_premium : 0.0;

    const MonthKey first{cfg.start_year, cfg.start_month};
    const MonthKey last = first.plus_months(cfg.months - 1);
    const double rf_monthly = std::pow(1.0 + cfg.rf_annual, 1.0 / 12.0) - 1.0;

    auto in_range = [&](const ValueRange& r) { return rng.uniform(r.lo, r.hi); };

    // Per security, in id order, four uniform draws then two log-normals.
    // Loading draws are consumed in both modes so equal seeds give both
    // generators the same securities; the single-factor mode keeps the
    // loadings at zero.
    std::vector<std::string> ids(cfg.n_securities);
    std::vector<double> s_draws, h_draws;
    for (int i = 0; i < cfg.n_securities; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "syn%05d", i);
        ids[i] = buf;
        SecurityTruth sec;
        sec.beta = in_range(cfg.beta);
        s_draws.push_back(in_range(cfg.smb_loading));
        h_draws.push_back(in_range(cfg.hml_loading));
        sec.idio_sd = in_range(cfg.idio_sd);
        sec.size = std::exp(rng.normal(cfg.size_log_mean, cfg.size_log_sd));
        sec.beme = std::exp(rng.normal(cfg.beme_log_mean, cfg.beme_log_sd));
        man.securities.emplace(ids[i], sec);
    }

    if (three_factor) {
        // Loadings attach to characteristic ranks: the drawn values are
        // reassigned so the smallest size carries the largest smb loading
        // and the highest book/market carries the largest hml loading.
        // Marginals stay uniform over the configured ranges.
        std::vector<std::pair<double, std::string>> by_size, by_beme;
        for (const auto& [id, sec] : man.securities) {
            by_size.emplace_back(sec.size, id);
            by_beme.emplace_back(sec.beme, id);
        }
        std::sort(by_size.begin(), by_size.end());
        std::sort(by_beme.begin(), by_beme.end());
        std::sort(s_draws.begin(), s_draws.end());
        std::sort(h_draws.begin(), h_draws.end());
        for (std::size_t k = 0; k < by_size.size(); ++k)
            man.securities.at(by_size[k].second).smb_loading = s_draws[s_draws.size() - 1 - k];
        for (std::size_t k = 0; k < by_beme.size(); ++k)
            man.securities.at(by_beme[k].second).hml_loading = h_draws[k];
    }

    if (three_factor && cfg.aligned_loadings) {
        // Exact-recovery mode: unit beta everywhere and loadings snapped to
        // the group values the 2x3 sort will assign, so realized factors
        // coincide with the latent draws when weights are flat.
        std::vector<double> sizes, bemes;
        for (const auto& [id, sec] : man.securities) {
            sizes.push_back(sec.size);
            bemes.push_back(sec.beme);
        }
        std::sort(sizes.begin(), sizes.end());
        std::sort(bemes.begin(), bemes.end());
        auto at_rank = [&](const std::vector<double>& v, double q) {
            auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()) - 1e-9));
            return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
        };
        const double med = at_rank(sizes, 0.5);
        const double lo30 = at_rank(bemes, 0.3), hi70 = at_rank(bemes, 0.7);
        for (auto& [id, sec] : man.securities) {
            sec.beta = 1.0;
            sec.smb_loading = sec.size <= med ? 0.5 : -0.5;
            sec.hml_loading = sec.beme <= lo30 ? -0.5 : (sec.beme <= hi70 ? 0.0 : 0.5);
        }
    }

    if (cfg.contamination_sd > 0.0) {
        std::vector<std::pair<double, std::string>> by_size;
        for (const auto& [id, sec] : man.securities) by_size.emplace_back(sec.size, id);
        std::sort(by_size.begin(), by_size.end());
        for (std::size_t k = 0; k < by_size.size() / 10; ++k) {
            SecurityTruth& sec = man.securities.at(by_size[k].second);
            sec.idio_sd = std::hypot(sec.idio_sd, cfg.contamination_sd);
        }
    }

    for (MonthKey m = first; !(last < m); m = m.plus_months(1)) {
        MonthTruth f;
        f.mkt_ret = rng.normal(cfg.market_mean, cfg.market_sd);
        if (three_factor) {
            f.smb = rng.normal(cfg.size_premium, cfg.smb_sd);
            f.hml = rng.normal(cfg.value_premium, cfg.hml_sd);
        }
        f.rf_monthly = rf_monthly;
        man.factors.emplace(m, f);
        out.panel.risk_free[m] = cfg.rf_annual;
    }

    for (MonthKey m = first; !(last < m); m = m.plus_months(1)) {
        const MonthTruth& f = man.factors.at(m);
        for (const std::string& id : ids) {
            const SecurityTruth& sec = man.securities.at(id);
            const double eps = sec.idio_sd > 0.0 ? rng.normal(0.0, sec.idio_sd) : 0.0;
            const double jitter =
                cfg.cap_jitter_sd > 0.0 ? std::exp(rng.normal(0.0, cfg.cap_jitter_sd)) : 1.0;
            const double market_cap = sec.size * jitter;
            // Aligned mode pins the weights flat so the realized factors
            // coincide with the latent draws.
            const double float_cap =
                three_factor && cfg.aligned_loadings ? 1.0 : 0.6 * market_cap;
            const double r = model_return(f.rf_monthly, sec, f, eps);
            out.panel.observations[id][m] = Obs{r, market_cap, float_cap, Status::normal};
            man.noise[id][m] = eps;
        }
    }

    // Constant fundamentals across every fiscal year a formation could ask
    // for, so sorts are stable through the whole span.
    for (const std::string& id : ids) {
        const SecurityTruth& sec = man.securities.at(id);
        for (int fy = first.year - 2; fy <= last.year - 1; ++fy)
            out.panel.fundamentals[id][fy] = Fundamentals{sec.beme * sec.size, sec.size, false};
    }
    return out;
}

}  // namespace detail

// r = rf + beta * (mkt - rf) + eps. Latent SMB/HML stay zero.
inline SyntheticMarket generate_capm_market(const DgpConfig& cfg) {
    return detail::generate_market(cfg, false);
}

// r = rf + b * (mkt - rf) + s * SMB + h * HML + eps with latent factor
// draws; realized factor estimates are whatever the sorts produce.
inline SyntheticMarket generate_ff3_market(const DgpConfig& cfg) {
    return detail::generate_market(cfg, true);
}

// The raw market return series, i.e. the external market proxy input.
inline std::map<MonthKey, double> market_series(const TruthManifest& man) {
    std::map<MonthKey, double> s;
    for (const auto& [m, f] : man.factors) s[m] = f.mkt_ret;
    return s;
}

inline constexpr const char* kManifestHeader = "kind,key,subkey,value";

// returns.csv, fundamentals.csv, riskfree.csv, market.csv, manifest.csv
// under dir; the first three use the ingestion schemas.
inline void write_market_inputs(const std::string& dir, const SyntheticMarket& market) {
    write_panel(market.panel, dir + "/returns.csv", dir + "/fundamentals.csv",
                dir + "/riskfree.csv");
    write_market_series(market_series(market.manifest), dir + "/market.csv");

    std::string out(kManifestHeader);
    out.push_back('\n');
    auto row = [&out](const std::string& kind, const std::string& key, const std::string& subkey,
                      double v) {
        out += kind;
        out.push_back(',');
        out += key;
        out.push_back(',');
        out += subkey;
        out.push_back(',');
        out += csv::format_double(v);
        out.push_back('\n');
    };
    row("premium", "market_mean", "", market.manifest.market_mean);
    row("premium", "size", "", market.manifest.size_premium);
    row("premium", "value", "", market.manifest.value_premium);
    for (const auto& [id, sec] : market.manifest.securities) {
        row("security", id, "beta", sec.beta);
        row("security", id, "smb", sec.smb_loading);
        row("security", id, "hml", sec.hml_loading);
        row("security", id, "idio_sd", sec.idio_sd);
        row("security", id, "size", sec.size);
        row("security", id, "beme", sec.beme);
    }
    for (const auto& [m, f] : market.manifest.factors) {
        row("factor", m.str(), "mkt_ret", f.mkt_ret);
        row("factor", m.str(), "smb", f.smb);
        row("factor", m.str(), "hml", f.hml);
        row("factor", m.str(), "rf_monthly", f.rf_monthly);
    }
    csv::write_file(dir + "/manifest.csv", out);
}

}  // namespace factorkit
