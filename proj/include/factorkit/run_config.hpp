#pragma once

// Run configuration: a flat key = value text file plus programmatic
// overrides (command-line flags win). '#' starts a comment, blank lines
// are ignored, unknown keys are rejected so configs stay diffable and
// typo-proof.

#include <charconv>
#include <fstream>
#include <string>
#include <vector>

#include "factorkit/errors.hpp"
#include "factorkit/csv.hpp"
#include "factorkit/fama_macbeth.hpp"
#include "factorkit/synth.hpp"

namespace factorkit {

enum class SynthMode { capm, ff3 };

struct RunConfig {
    std::string returns_path = "returns.csv";
    std::string fundamentals_path = "fundamentals.csv";
    std::string riskfree_path = "riskfree.csv";
    std::string market_path;  // market index series; required by the cross-sectional study
    std::string out_dir = "out";
    unsigned jobs = 1;
    double shell_fraction = 0.0;
    int scheme_index = 0;  // 0 = every scheme plus the pooled window, 1..n = one scheme
    std::vector<PeriodScheme> schemes = default_schemes();
    std::vector<Variant> variants = all_variants();
    int n_groups = 20;
    int min_obs = kDefaultMinBetaObs;
    std::size_t min_overlap = 36;
    bool smb_hml_intercept = false;
    // Factor conventions are spelled out so a config fully describes its
    // run; each currently has a single supported value, checked below.
    std::string weight_base = "float_cap";
    std::string percentile_rule = "rank_ceil";
    std::string rf_compounding = "monthly_compound";
    SynthMode synth_mode = SynthMode::ff3;
    DgpConfig synth;

    void validate() const {
        if (jobs < 1) raise(Errc::invalid_config, "jobs must be at least 1");
        if (!(shell_fraction >= 0.0 && shell_fraction < 1.0))
            raise(Errc::invalid_config, "shell_fraction must lie in [0, 1)");
        if (scheme_index < 0 || static_cast<std::size_t>(scheme_index) > schemes.size())
            raise(Errc::invalid_config,
                  "scheme index must be 0 (all) or 1.." + std::to_string(schemes.size()));
        if (n_groups < 1) raise(Errc::invalid_config, "n_groups must be positive");
        if (min_obs < 2) raise(Errc::invalid_config, "min_obs must be at least 2");
        if (variants.empty()) raise(Errc::invalid_config, "variant set must not be empty");
        if (weight_base != "float_cap")
            raise(Errc::invalid_config, "unsupported weight_base (only float_cap)");
        if (percentile_rule != "rank_ceil")
            raise(Errc::invalid_config, "unsupported percentile_rule (only rank_ceil)");
        if (rf_compounding != "monthly_compound")
            raise(Errc::invalid_config, "unsupported rf_compounding (only monthly_compound)");
        for (const PeriodScheme& s : schemes) s.validate();
        synth.validate();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline int config_int(const std::string& key, const std::string& value) {
    auto v = csv::parse_int(value);
    if (!v) raise(Errc::invalid_config, key + " expects an integer, got '" + value + "'");
    return *v;
}

inline double config_double(const std::string& key, const std::string& value) {
    auto v = csv::parse_double(value);
    if (!v) raise(Errc::invalid_config, key + " expects a number, got '" + value + "'");
    return *v;
}

inline std::uint64_t config_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const char* first = value.data();
    const char* last = first + value.size();
    auto [p, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || p != last)
        raise(Errc::invalid_config, key + " expects an unsigned integer, got '" + value + "'");
    return out;
}

inline bool config_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    raise(Errc::invalid_config, key + " expects 0/1/true/false, got '" + value + "'");
}

inline YearRange config_year_range(const std::string& key, const std::string& part) {
    const std::size_t dash = part.find('-');
    if (dash == std::string::npos || part.find('-', dash + 1) != std::string::npos)
        raise(Errc::invalid_config, key + ": range '" + part + "' is not FIRST-LAST");
    return {config_int(key, trim(part.substr(0, dash))),
            config_int(key, trim(part.substr(dash + 1)))};
}

// "2000-2003,2004-2008,2009-2012" -> formation, initial estimation, testing.
inline PeriodScheme config_scheme(const std::string& key, const std::string& value) {
    const std::vector<std::string> parts = csv::split(value);
    if (parts.size() != 3)
        raise(Errc::invalid_config, key + " expects three year ranges, got '" + value + "'");
    return PeriodScheme{config_year_range(key, trim(parts[0])),
                        config_year_range(key, trim(parts[1])),
                        config_year_range(key, trim(parts[2]))};
}

inline std::vector<Variant> config_variants(const std::string& value) {
    bool seen[4] = {};
    for (char c : value) {
        switch (c) {
            case 'A': seen[0] = true; break;
            case 'B': seen[1] = true; break;
            case 'C': seen[2] = true; break;
            case 'D': seen[3] = true; break;
            default:
                raise(Errc::invalid_config,
                      std::string("variants expects letters A-D, got '") + c + "'");
        }
    }
    std::vector<Variant> out;
    for (int i = 0; i < 4; ++i)
        if (seen[i]) out.push_back(static_cast<Variant>(i));
    if (out.empty()) raise(Errc::invalid_config, "variants must name at least one of A-D");
    return out;
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    using detail::config_bool;
    using detail::config_double;
    using detail::config_int;
    using detail::config_u64;
    if (key == "returns") cfg.returns_path = value;
    else if (key == "fundamentals") cfg.fundamentals_path = value;
    else if (key == "riskfree") cfg.riskfree_path = value;
    else if (key == "market") cfg.market_path = value;
    else if (key == "out") cfg.out_dir = value;
    else if (key == "jobs") cfg.jobs = static_cast<unsigned>(config_int(key, value));
    else if (key == "shell_fraction") cfg.shell_fraction = config_double(key, value);
    else if (key == "scheme") cfg.scheme_index = config_int(key, value);
    else if (key == "variants") cfg.variants = detail::config_variants(value);
    else if (key == "n_groups") cfg.n_groups = config_int(key, value);
    else if (key == "min_obs") cfg.min_obs = config_int(key, value);
    else if (key == "min_overlap") cfg.min_overlap = static_cast<std::size_t>(config_int(key, value));
    else if (key == "smb_hml_intercept") cfg.smb_hml_intercept = config_bool(key, value);
    else if (key == "weight_base") cfg.weight_base = value;
    else if (key == "percentile_rule") cfg.percentile_rule = value;
    else if (key == "rf_compounding") cfg.rf_compounding = value;
    else if (key == "scheme1") cfg.schemes.at(0) = detail::config_scheme(key, value);
    else if (key == "scheme2") cfg.schemes.at(1) = detail::config_scheme(key, value);
    else if (key == "scheme3") cfg.schemes.at(2) = detail::config_scheme(key, value);
    else if (key == "synth.mode") {
        if (value == "capm") cfg.synth_mode = SynthMode::capm;
        else if (value == "ff3") cfg.synth_mode = SynthMode::ff3;
        else raise(Errc::invalid_config, "synth.mode must be capm or ff3, got '" + value + "'");
    }
    else if (key == "synth.n_securities") cfg.synth.n_securities = config_int(key, value);
    else if (key == "synth.months") cfg.synth.months = config_int(key, value);
    else if (key == "synth.seed") cfg.synth.seed = config_u64(key, value);
    else if (key == "synth.start_year") cfg.synth.start_year = config_int(key, value);
    else if (key == "synth.start_month") cfg.synth.start_month = config_int(key, value);
    else if (key == "synth.market_mean") cfg.synth.market_mean = config_double(key, value);
    else if (key == "synth.market_sd") cfg.synth.market_sd = config_double(key, value);
    else if (key == "synth.rf_annual") cfg.synth.rf_annual = config_double(key, value);
    else if (key == "synth.beta_lo") cfg.synth.beta.lo = config_double(key, value);
    else if (key == "synth.beta_hi") cfg.synth.beta.hi = config_double(key, value);
    else if (key == "synth.smb_lo") cfg.synth.smb_loading.lo = config_double(key, value);
    else if (key == "synth.smb_hi") cfg.synth.smb_loading.hi = config_double(key, value);
    else if (key == "synth.hml_lo") cfg.synth.hml_loading.lo = config_double(key, value);
    else if (key == "synth.hml_hi") cfg.synth.hml_loading.hi = config_double(key, value);
    else if (key == "synth.idio_lo") cfg.synth.idio_sd.lo = config_double(key, value);
    else if (key == "synth.idio_hi") cfg.synth.idio_sd.hi = config_double(key, value);
    else if (key == "synth.size_premium") cfg.synth.size_premium = config_double(key, value);
    else if (key == "synth.value_premium") cfg.synth.value_premium = config_double(key, value);
    else if (key == "synth.smb_sd") cfg.synth.smb_sd = config_double(key, value);
    else if (key == "synth.hml_sd") cfg.synth.hml_sd = config_double(key, value);
    else if (key == "synth.size_log_mean") cfg.synth.size_log_mean = config_double(key, value);
    else if (key == "synth.size_log_sd") cfg.synth.size_log_sd = config_double(key, value);
    else if (key == "synth.beme_log_mean") cfg.synth.beme_log_mean = config_double(key, value);
    else if (key == "synth.beme_log_sd") cfg.synth.beme_log_sd = config_double(key, value);
    else if (key == "synth.contamination_sd") cfg.synth.contamination_sd = config_double(key, value);
    else if (key == "synth.cap_jitter_sd") cfg.synth.cap_jitter_sd = config_double(key, value);
    else if (key == "synth.aligned") cfg.synth.aligned_loadings = config_bool(key, value);
    else raise(Errc::invalid_config, "unknown config key '" + key + "'");
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_error, "cannot open config file " + path);
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            raise(Errc::invalid_config,
                  path + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            raise(Errc::invalid_config, path + ":" + std::to_string(line_no) + ": empty key");
        apply_config_entry(cfg, key, value);
    }
    return cfg;
}

}  // namespace factorkit
