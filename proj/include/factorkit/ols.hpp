#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "factorkit/errors.hpp"
#include "factorkit/month.hpp"

namespace factorkit {

// Row-major design matrix. `has_intercept` marks that one column is all ones;
// it selects centered vs uncentered total sum of squares for R².
struct DesignMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    bool has_intercept = false;

    DesignMatrix() = default;
    DesignMatrix(std::size_t r, std::size_t c, bool intercept)
        : rows(r), cols(c), data(r * c, 0.0), has_intercept(intercept) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct FitOptions {
    // Column j is declared dependent when, after projecting out the previous
    // kept columns, its residual norm is < rank_tol * its original norm.
    double rank_tol = 1e-10;
    // Per-column policy: a dependent droppable column gets coefficient 0 and
    // NaN standard error instead of raising RANK_DEFICIENT. Empty = none.
    std::vector<bool> droppable;
};

struct RegressionResult {
    std::vector<double> coefficients;
    std::vector<double> std_errors;  // classical (homoskedastic); NaN for dropped columns
    std::vector<double> t_stats;     // coef/se; +-inf when se == 0 and coef != 0
    std::vector<bool> dropped;       // dependent columns zeroed under FitOptions::droppable
    double r_squared = 0.0;
    double adj_r_squared = 0.0;
    double residual_sd = 0.0;  // sqrt(SSR / (n - k)), k = columns kept
    std::size_t n_obs = 0;
    std::size_t df_resid = 0;
    std::vector<double> residuals;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

// Least squares via modified Gram-Schmidt QR. Coefficients minimize the sum
// of squared residuals; standard errors are classical with the n - k
// denominator.
inline RegressionResult ols_fit(const DesignMatrix& X, std::span<const double> y,
                                const FitOptions& opts = {}) {
    const std::size_t n = X.rows;
    const std::size_t k = X.cols;
    if (k == 0) raise(Errc::dimension_mismatch, "design matrix has no columns");
    if (y.size() != n)
        raise(Errc::dimension_mismatch,
              "y has " + std::to_string(y.size()) + " rows, X has " + std::to_string(n));
    if (n <= k)
        raise(Errc::too_few_obs,
              "n=" + std::to_string(n) + " observations for k=" + std::to_string(k) + " regressors");
    if (!opts.droppable.empty() && opts.droppable.size() != k)
        raise(Errc::dimension_mismatch, "droppable mask size does not match column count");
    for (double v : X.data)
        if (!std::isfinite(v)) raise(Errc::dimension_mismatch, "non-finite value in design matrix");
    for (double v : y)
        if (!std::isfinite(v)) raise(Errc::dimension_mismatch, "non-finite value in response");

    std::vector<std::vector<double>> q;           // orthonormal kept columns
    std::vector<std::vector<double>> r_cols;      // R entries per kept column (incl. diagonal)
    std::vector<std::size_t> kept;                // original indices of kept columns
    std::vector<bool> dropped(k, false);

    std::vector<double> v(n);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < n; ++i) v[i] = X.at(i, j);
        const double col_norm = detail::norm2(v);
        std::vector<double> rj(kept.size() + 1, 0.0);
        for (std::size_t i = 0; i < kept.size(); ++i) {
            const double r = detail::dot(q[i], v);
            rj[i] = r;
            for (std::size_t t = 0; t < n; ++t) v[t] -= r * q[i][t];
        }
        const double resid_norm = detail::norm2(v);
        if (col_norm == 0.0 || resid_norm < opts.rank_tol * col_norm) {
            if (!opts.droppable.empty() && opts.droppable[j]) {
                dropped[j] = true;
                continue;
            }
            raise(Errc::rank_deficient, "column " + std::to_string(j) + " is linearly dependent");
        }
        rj.back() = resid_norm;
        for (std::size_t t = 0; t < n; ++t) v[t] /= resid_norm;
        q.push_back(v);
        r_cols.push_back(std::move(rj));
        kept.push_back(j);
    }

    const std::size_t kk = kept.size();
    // z = Q'y, then back-substitute R b = z.
    std::vector<double> z(kk);
    for (std::size_t i = 0; i < kk; ++i) z[i] = detail::dot(q[i], y);
    std::vector<double> b(kk, 0.0);
    for (std::size_t i = kk; i-- > 0;) {
        double s = z[i];
        for (std::size_t j = i + 1; j < kk; ++j) s -= r_cols[j][i] * b[j];
        b[i] = s / r_cols[i][i];
    }

    RegressionResult res;
    res.n_obs = n;
    res.df_resid = n - kk;
    res.dropped = dropped;
    res.coefficients.assign(k, 0.0);
    for (std::size_t i = 0; i < kk; ++i) res.coefficients[kept[i]] = b[i];

    res.residuals.assign(y.begin(), y.end());
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t i = 0; i < kk; ++i) res.residuals[t] -= X.at(t, kept[i]) * b[i];

    double ssr = 0.0;
    for (double e : res.residuals) ssr += e * e;
    res.residual_sd = std::sqrt(ssr / static_cast<double>(res.df_resid));

    double tss = 0.0;
    if (X.has_intercept) {
        double ybar = 0.0;
        for (double yy : y) ybar += yy;
        ybar /= static_cast<double>(n);
        for (double yy : y) tss += (yy - ybar) * (yy - ybar);
    } else {
        for (double yy : y) tss += yy * yy;
    }
    if (tss > 0.0) {
        res.r_squared = 1.0 - ssr / tss;
        if (res.r_squared < 0.0) res.r_squared = 0.0;
        if (res.r_squared > 1.0) res.r_squared = 1.0;
    } else {
        // Constant (or zero) response: call it a perfect fit only if the
        // residuals vanish at rounding scale.
        double scale = 0.0;
        for (double yy : y) scale = std::max(scale, std::abs(yy));
        res.r_squared = (ssr <= n * (1e-12 * (1.0 + scale)) * (1e-12 * (1.0 + scale))) ? 1.0 : 0.0;
    }
    res.adj_r_squared =
        1.0 - (1.0 - res.r_squared) * static_cast<double>(n - 1) / static_cast<double>(n - kk);

    // (X'X)^{-1} = R^{-1} R^{-T}; invert R by back substitution.
    std::vector<std::vector<double>> rinv(kk, std::vector<double>(kk, 0.0));
    for (std::size_t c = 0; c < kk; ++c) {
        std::vector<double> e(kk, 0.0);
        e[c] = 1.0;
        for (std::size_t i = kk; i-- > 0;) {
            double s = e[i];
            for (std::size_t j = i + 1; j < kk; ++j) s -= r_cols[j][i] * rinv[j][c];
            rinv[i][c] = s / r_cols[i][i];
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    res.std_errors.assign(k, nan);
    res.t_stats.assign(k, nan);
    for (std::size_t i = 0; i < kk; ++i) {
        double d = 0.0;
        for (std::size_t m = 0; m < kk; ++m) d += rinv[i][m] * rinv[i][m];
        const double se = res.residual_sd * std::sqrt(d);
        const double coef = b[i];
        res.std_errors[kept[i]] = se;
        if (se > 0.0)
            res.t_stats[kept[i]] = coef / se;
        else
            res.t_stats[kept[i]] =
                coef == 0.0 ? nan : std::copysign(std::numeric_limits<double>::infinity(), coef);
    }
    return res;
}

struct BetaEstimate {
    double beta = 0.0;
    double alpha = 0.0;
    double residual_sd = 0.0;
    std::size_t n_obs = 0;
};

inline constexpr std::size_t kDefaultMinBetaObs = 24;

// Market-model fit R_i = alpha + beta * R_m + e on pre-aligned series.
// beta coincides with cov(R_i, R_m)/var(R_m) on the same window.
inline BetaEstimate market_model(std::span<const double> r_i, std::span<const double> r_m,
                                 std::size_t min_obs = kDefaultMinBetaObs) {
    if (r_i.size() != r_m.size()) raise(Errc::dimension_mismatch, "series lengths differ");
    const std::size_t n = r_i.size();
    if (n < min_obs || n < 3)
        raise(Errc::too_few_obs, std::to_string(n) + " overlapping months, need " +
                                     std::to_string(std::max<std::size_t>(min_obs, 3)));
    DesignMatrix X(n, 2, true);
    for (std::size_t t = 0; t < n; ++t) {
        X.at(t, 0) = 1.0;
        X.at(t, 1) = r_m[t];
    }
    RegressionResult fit;
    try {
        fit = ols_fit(X, r_i);
    } catch (const Error& e) {
        if (e.code() == Errc::rank_deficient)
            raise(Errc::zero_market_variance, "market series has no variance over the window");
        throw;
    }
    // Residual dispersion below the rounding floor of the fit is an exact
    // fit; snap it so downstream columns of residual sds vanish cleanly.
    double scale = 0.0;
    for (double v : r_i) scale = std::max(scale, std::abs(v));
    double resid_sd = fit.residual_sd;
    if (resid_sd <= 1e-12 * (1.0 + scale)) resid_sd = 0.0;
    return BetaEstimate{fit.coefficients[1], fit.coefficients[0], resid_sd, n};
}

using MonthlySeries = std::map<MonthKey, double>;

// Aligns two monthly series on their common months (dropping non-finite
// values pairwise) and runs the market-model fit.
inline BetaEstimate estimate_beta(const MonthlySeries& r_i, const MonthlySeries& r_m,
                                  std::size_t min_obs = kDefaultMinBetaObs) {
    std::vector<double> xi, xm;
    xi.reserve(r_i.size());
    xm.reserve(r_i.size());
    for (const auto& [month, ri] : r_i) {
        if (!std::isfinite(ri)) continue;
        auto it = r_m.find(month);
        if (it == r_m.end() || !std::isfinite(it->second)) continue;
        xi.push_back(ri);
        xm.push_back(it->second);
    }
    return market_model(xi, xm, min_obs);
}

// Blume identity: the beta of a fixed-weight portfolio is the weight-average
// of member betas.
inline double portfolio_beta(std::span<const double> member_betas, std::span<const double> weights) {
    if (member_betas.size() != weights.size())
        raise(Errc::dimension_mismatch, "betas and weights differ in length");
    if (member_betas.empty()) raise(Errc::dimension_mismatch, "no members");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) raise(Errc::weight_sum, "negative weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        raise(Errc::weight_sum, "weights sum to " + std::to_string(sum) + ", expected 1");
    double b = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) b += weights[i] * member_betas[i];
    return b;
}

}  // namespace factorkit
