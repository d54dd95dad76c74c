#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>

#include "factorkit/errors.hpp"

namespace factorkit {

// Standard normal quantiles used for significance stars and verdicts.
// One-sided: z_{1-a}; two-sided tests use z_{1-a/2}.
inline constexpr double kZ90 = 1.2815515655446004;    // one-sided 10%
inline constexpr double kZ95 = 1.6448536269514722;    // one-sided 5% / two-sided 10%
inline constexpr double kZ975 = 1.959963984540054;    // two-sided 5%
inline constexpr double kZ99 = 2.3263478740408408;    // one-sided 1%
inline constexpr double kZ995 = 2.5758293035489004;   // two-sided 1%

inline constexpr const char* kSignificanceLegend = "* p < 0.1, ** p < 0.05, *** p < 0.01";

inline double mean(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Sample standard deviation, n-1 denominator.
inline double sample_sd(std::span<const double> xs) {
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

struct SeriesStats {
    double mean = 0.0;
    double sd = 0.0;
    double t = 0.0;  // mean / (sd / sqrt(n)); +-inf when sd == 0 and mean != 0, NaN on 0/0
    std::size_t n = 0;
};

// One-sample t of zero mean: t = mean / (sd / sqrt(n)). This is the single
// aggregation formula shared by the gamma series and the spread tests.
inline SeriesStats series_stats(std::span<const double> xs) {
    if (xs.size() < 2) raise(Errc::empty_series, "need at least 2 values, got " + std::to_string(xs.size()));
    SeriesStats st;
    st.n = xs.size();
    st.mean = mean(xs);
    st.sd = sample_sd(xs);
    if (st.sd > 0.0) {
        st.t = st.mean / (st.sd / std::sqrt(static_cast<double>(st.n)));
    } else if (st.mean == 0.0) {
        st.t = 0.0;  // identically zero series carries no evidence either way
    } else {
        st.t = std::copysign(std::numeric_limits<double>::infinity(), st.mean);
    }
    return st;
}

// Two-sided stars from a t statistic under normal critical values.
inline std::string stars(double t) {
    if (std::isnan(t)) return "";
    const double a = std::abs(t);
    if (a > kZ995) return "***";
    if (a > kZ975) return "**";
    if (a > kZ95) return "*";
    return "";
}

}  // namespace factorkit
