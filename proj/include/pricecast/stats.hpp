#pragma once

#include <map>
#include <string>
#include <vector>

namespace pricecast::stats {

/// Elementwise natural log. Any non-positive entry throws.
std::vector<double> log_series(const std::vector<double>& series);

/// d-fold first difference; the result is d elements shorter.
std::vector<double> diff(const std::vector<double>& series, int d = 1);

/// Sample autocorrelations for lags 0..max_lag. The denominator is the
/// full-sample sum of squared deviations, so estimates shrink toward zero
/// at long lags.
std::vector<double> acf(const std::vector<double>& series, int max_lag);

/// Partial autocorrelations for lags 0..max_lag via the Durbin-Levinson
/// recursion on the sample ACF. Entry 0 is 1 by convention.
std::vector<double> pacf(const std::vector<double>& series, int max_lag);

struct AdfResult {
    double statistic = 0.0;
    int lags_used = 0;
    std::map<std::string, double> critical_values;     // keys "1%", "5%", "10%"
    bool reject_unit_root = false;                     // at the 5% level
};

/**
 * @brief Augmented Dickey-Fuller unit-root test, constant-only regression.
 *
 * Fits dy_t = c + g*y_{t-1} + sum b_i dy_{t-i} + e_t, choosing the lag
 * order k in 0..floor(12*(n/100)^(1/4)) by AIC on a common sample, then
 * refitting the chosen order on all usable rows. The statistic is the OLS
 * t-ratio of g, compared against the large-sample Dickey-Fuller critical
 * values for the constant-only case.
 */
AdfResult adf_test(const std::vector<double>& series);

struct LjungBoxEntry {
    int lag = 0;
    double q_stat = 0.0;
    double chi2_95 = 0.0;
    bool white_noise_ok = false;     // q_stat below the 95% quantile
};

struct LjungBoxResult {
    std::vector<LjungBoxEntry> entries;
};

/// Ljung-Box portmanteau test on residuals at each requested lag h:
/// Q_h = n(n+2) sum_{k=1..h} r_k^2/(n-k), compared against the 95% quantile
/// of chi-square with h degrees of freedom.
LjungBoxResult ljung_box(const std::vector<double>& residuals,
                         const std::vector<int>& lags = {1, 6, 12});

/// Regularized lower incomplete gamma P(a, x), by series expansion for
/// x < a+1 and continued fraction otherwise.
double gamma_p(double a, double x);

/// Chi-square CDF and its inverse. The quantile is solved by bisection on
/// the CDF, which is slow but exact enough (1e-12) and has no edge cases.
double chi2_cdf(double x, int dof);
double chi2_quantile(double prob, int dof);

}
