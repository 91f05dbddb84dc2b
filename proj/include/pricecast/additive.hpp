#pragma once

#include "pricecast/calendar.hpp"
#include "pricecast/metrics.hpp"
#include "pricecast/optim.hpp"
#include "pricecast/weekly.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace pricecast::additive {

/// (date, value) observations, strictly increasing in time.
using DatedSeries = std::vector<std::pair<Date, double>>;

struct AdditiveConfig {
    double tau = 0.05;                  // changepoint prior scale
    double sigma_season = 1.0;          // seasonal coefficient prior scale
    int changepoints = 25;              // S
    double changepoint_fraction = 0.8;  // changepoints cover this share of history
    int fourier_order = 10;             // N harmonics
    double period_days = 365.25;        // P
    optim::LbfgsOptions solver;         // grad tol 1e-8, 500 iterations
};

/**
 * @brief Fitted piecewise-linear trend plus Fourier seasonality.
 *
 * The trend is (k + sum_{t > s_i} delta_i) t + (m + sum gamma_i) with
 * gamma_i = -s_i delta_i, which keeps the line continuous across every
 * changepoint; the gammas are derived on the fly, never stored. Units are
 * euros and days since the Unix epoch, regardless of any scaling used
 * during fitting.
 */
struct AdditiveParams {
    double base_rate = 0.0;             // k, euros per day
    double offset = 0.0;                // m, euros
    Eigen::VectorXd rate_adjust;        // delta, one per changepoint
    Eigen::VectorXd changepoints;       // s_i, days since epoch (fractional)
    Eigen::VectorXd season_cos;         // a_1..a_N
    Eigen::VectorXd season_sin;         // b_1..b_N
    double period_days = 365.25;
};

/// Evenly spaced changepoints over the first `fraction` of the observed
/// span: s_i = t_first + i * (fraction * span) / count, i = 1..count,
/// returned as fractional days since the epoch. count must not exceed the
/// number of observations.
Eigen::VectorXd place_changepoints(const std::vector<Date>& train_dates, int count,
                                   double fraction);

double trend_eval(const AdditiveParams& params, double t_days);
double seasonality_eval(const AdditiveParams& params, double t_days);
double predict(const AdditiveParams& params, double t_days);
double predict(const AdditiveParams& params, Date d);

/**
 * @brief Data and hyper-parameters behind the MAP objective, with the
 * hinge and Fourier feature matrices precomputed.
 *
 * Time and value units are whatever the caller supplies; the objective is
 * unit-agnostic. fit_map builds a scaled instance internally.
 */
struct MapData {
    Eigen::VectorXd t;
    Eigen::VectorXd y;
    Eigen::VectorXd changepoints;
    double tau = 0.05;
    double sigma_season = 1.0;
    int fourier_order = 10;
    double period = 365.25;
    Eigen::MatrixXd hinge;              // (t_i - s_j) clamped at 0
    Eigen::MatrixXd fourier;            // [cos columns | sin columns]

    MapData(Eigen::VectorXd t_in, Eigen::VectorXd y_in, Eigen::VectorXd changepoints_in,
            double tau_in, double sigma_in, int order_in, double period_in);
};

/// Parameter packing used by the objective: [k, m, delta(S), a(N), b(N)].
/**
 * @brief Negative log posterior and its gradient.
 *
 * 0.5 * sum r^2 + (1/tau) * sum sqrt(delta^2 + eps^2)
 *               + (1/(2 sigma^2)) * sum (a^2 + b^2),
 * with eps = 1e-8 smoothing the Laplace prior so the objective stays
 * differentiable at zero. The gradient is analytic.
 */
double neg_log_posterior(const Eigen::VectorXd& packed, const MapData& data,
                         Eigen::VectorXd& grad);

/**
 * @brief MAP fit of the additive model on dated observations.
 *
 * Internally time is mapped to [0, 1] over the observed span and values
 * are divided by their maximum, following the reference implementation of
 * this model family; the L-BFGS solution is converted back to
 * euros-per-day exactly (the seasonal coefficients pick up a phase
 * rotation). The prior scales therefore act on the normalised problem.
 */
AdditiveParams fit_map(const DatedSeries& train, const AdditiveConfig& config);

struct AdditiveGridCell {
    double tau = 0.0;
    double sigma_season = 0.0;
    double valid_rmse = 0.0;
    bool failed = false;
};

struct AdditiveGridResult {
    AdditiveConfig best;
    double valid_rmse = 0.0;
    std::vector<AdditiveGridCell> cells;
};

/// Default hyper-parameter grids for grid_search_additive.
std::vector<double> default_tau_grid();
std::vector<double> default_sigma_grid();

/**
 * @brief Grid search over (tau, sigma) by expanding-window one-step
 * validation.
 *
 * For every validation week the model is refitted on all observed
 * (non-interpolated) rows before that week and predicts it; the cell
 * score is the RMSE of those one-step errors. A failed fit marks the cell
 * infinite. Ties go to the smaller tau, then the smaller sigma. Cells run
 * in parallel across `jobs` threads without affecting the result.
 */
AdditiveGridResult grid_search_additive(const weekly::WeeklySeries& train,
                                        const weekly::WeeklySeries& valid,
                                        const std::vector<double>& tau_grid,
                                        const std::vector<double>& sigma_grid,
                                        const AdditiveConfig& base, int jobs = 1);

struct AdditiveEval {
    metrics::ForecastSeries forecasts;
    metrics::MetricsReport metrics;
};

/**
 * @brief One-step test evaluation with weekly refits.
 *
 * Every row of `history` dated eval_start or later is forecast by a model
 * fitted on all observed rows strictly before it. Increments are taken
 * against the immediately preceding row of the (gap-filled) history, so
 * every model family is scored on identical weeks and baselines.
 */
AdditiveEval expanding_window_eval(const AdditiveConfig& config,
                                   const weekly::WeeklySeries& history, Date eval_start);

}
