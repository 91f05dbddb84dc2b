#pragma once

#include "pricecast/stats.hpp"

#include <Eigen/Dense>

#include <vector>

namespace pricecast::arima {

/// Model order (p, d, q). Only d = 0 and d = 1 are supported; the price
/// pipeline always works on d = 1 in log space.
struct ArimaSpec {
    int p = 0;
    int d = 1;
    int q = 0;
    int param_count() const { return p + q; }
};

/// Conditional sum-of-squares evaluation: the Gaussian negative
/// log-likelihood (up to the usual constants folded in) and the residual
/// series it was computed from.
struct CssEval {
    double value = 0.0;
    std::vector<double> residuals;
};

/**
 * @brief CSS objective for an ARMA(p, q) on the differenced series w.
 *
 * Residuals follow e_t = w_t - sum phi_i w_{t-i} - sum theta_j e_{t-j} for
 * t >= max(p, q), with presample residuals pinned to zero. With
 * n = len(w) - max(p, q) and s2 = sum e^2 / n, the returned value is
 * (n/2)(ln 2pi + ln s2 + 1), i.e. the negative log-likelihood at the
 * profiled-out innovation variance. Series shorter than max(p, q) + 5
 * throw.
 */
CssEval css_objective(const Eigen::VectorXd& phi, const Eigen::VectorXd& theta,
                      const std::vector<double>& w);

struct ArimaFit {
    ArimaSpec spec;
    Eigen::VectorXd phi;
    Eigen::VectorXd theta;
    double sigma2 = 0.0;
    double loglik = 0.0;
    double bic = 0.0;
    std::vector<double> residuals;
    /// Set when an AR or MA polynomial root has modulus <= 1.001, i.e. the
    /// fit sits on or inside the stationarity/invertibility boundary.
    bool boundary_warning = false;
};

/**
 * @brief Fits one order by CSS, minimised with Nelder-Mead.
 *
 * The optimiser restarts from the zero vector and three deterministic
 * +-0.1 perturbations of it, keeping the best final value. BIC counts
 * p + q + 1 parameters (the innovation variance included) against the CSS
 * sample size.
 */
ArimaFit fit_arima(const std::vector<double>& series, const ArimaSpec& spec);

/// All (p, d, q) combinations with p <= pmax, q <= qmax at fixed d.
std::vector<ArimaSpec> default_grid(int pmax, int qmax, int d = 1);

/// Fits every candidate and returns the one with the least BIC. Near-ties
/// (within 1e-9 relative) go to the model with fewer parameters, then the
/// lower q.
ArimaFit select_arima(const std::vector<double>& series, const std::vector<ArimaSpec>& candidates);

/// One-step-ahead walk over the tail of a log-price series.
struct RollingForecast {
    std::size_t start = 0;              // index of the first forecast week
    std::vector<double> price_hat;      // level forecasts, euros
    std::vector<double> delta_hat;      // price_hat minus the previous observed price
};

/**
 * @brief Rolling one-step forecasts with teacher forcing.
 *
 * For each t from test_start on, the model sees the observed history up to
 * t-1, predicts the next difference, and the level forecast is rebuilt as
 * p_{t-1} * exp(dhat) (d = 1) or exp(yhat) (d = 0). Coefficients stay
 * frozen at the supplied fit unless refit_each_step is set, in which case
 * the same order is re-estimated on the data before every step.
 */
RollingForecast rolling_forecast(const ArimaFit& fit, const std::vector<double>& log_prices,
                                 std::size_t test_start, bool refit_each_step = false);

/// Ljung-Box on the CSS residuals of a fit.
stats::LjungBoxResult residual_diagnostics(const ArimaFit& fit,
                                           const std::vector<int>& lags = {1, 6, 12});

}
