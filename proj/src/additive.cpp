#include "pricecast/additive.hpp"

#include "pricecast/parallel.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pricecast::additive {

namespace {

// Smoothing of the Laplace prior at zero: psi(x) = sqrt(x^2 + eps^2).
constexpr double kSmoothEps = 1e-8;

void validate_series(const DatedSeries& series, const char* where) {
    if (series.size() < 2) {
        throw std::invalid_argument(std::string(where) + ": need at least two observations");
    }
    for (std::size_t i = 1; i < series.size(); ++i) {
        if (!(series[i - 1].first < series[i].first)) {
            throw std::invalid_argument(std::string(where) + ": dates not strictly increasing");
        }
    }
}

/// Observed (non-interpolated) rows of a weekly series as dated values.
DatedSeries observed_rows(const weekly::WeeklySeries& series) {
    DatedSeries out;
    out.reserve(series.size());
    for (const auto& row : series.rows) {
        if (!row.interpolated) {
            out.emplace_back(row.week_start, row.avg_price);
        }
    }
    return out;
}

}

Eigen::VectorXd place_changepoints(const std::vector<Date>& train_dates, int count,
                                   double fraction) {
    if (count < 1) {
        throw std::invalid_argument("place_changepoints: count must be at least 1");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("place_changepoints: fraction must be in (0, 1]");
    }
    if (std::size_t(count) > train_dates.size()) {
        throw std::invalid_argument("place_changepoints: more changepoints than observations");
    }
    const double t0 = double(days_since_epoch(train_dates.front()));
    const double span = double(days_since_epoch(train_dates.back())) - t0;
    if (span <= 0.0) {
        throw std::invalid_argument("place_changepoints: empty time span");
    }
    Eigen::VectorXd s(count);
    for (int i = 1; i <= count; ++i) {
        s(i - 1) = t0 + double(i) * (fraction * span) / double(count);
    }
    return s;
}

double trend_eval(const AdditiveParams& params, double t_days) {
    double rate = params.base_rate;
    double level = params.offset;
    for (Eigen::Index j = 0; j < params.rate_adjust.size(); ++j) {
        if (t_days > params.changepoints(j)) {
            rate += params.rate_adjust(j);
            level -= params.changepoints(j) * params.rate_adjust(j);
        }
    }
    return rate * t_days + level;
}

double seasonality_eval(const AdditiveParams& params, double t_days) {
    double sum = 0.0;
    for (Eigen::Index n = 1; n <= params.season_cos.size(); ++n) {
        const double angle = 2.0 * std::numbers::pi * double(n) * t_days / params.period_days;
        sum += params.season_cos(n - 1) * std::cos(angle) +
               params.season_sin(n - 1) * std::sin(angle);
    }
    return sum;
}

double predict(const AdditiveParams& params, double t_days) {
    return trend_eval(params, t_days) + seasonality_eval(params, t_days);
}

double predict(const AdditiveParams& params, Date d) {
    return predict(params, double(days_since_epoch(d)));
}

MapData::MapData(Eigen::VectorXd t_in, Eigen::VectorXd y_in, Eigen::VectorXd changepoints_in,
                 double tau_in, double sigma_in, int order_in, double period_in)
    : t(std::move(t_in)),
      y(std::move(y_in)),
      changepoints(std::move(changepoints_in)),
      tau(tau_in),
      sigma_season(sigma_in),
      fourier_order(order_in),
      period(period_in) {
    if (t.size() != y.size() || t.size() == 0) {
        throw std::invalid_argument("MapData: t and y must be non-empty and equally long");
    }
    if (tau <= 0.0 || sigma_season <= 0.0 || period <= 0.0 || fourier_order < 0) {
        throw std::invalid_argument("MapData: bad hyper-parameters");
    }
    const Eigen::Index n = t.size();
    const Eigen::Index s_count = changepoints.size();
    hinge.resize(n, s_count);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < s_count; ++j) {
            hinge(i, j) = t(i) > changepoints(j) ? t(i) - changepoints(j) : 0.0;
        }
    }
    fourier.resize(n, 2 * fourier_order);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int h = 1; h <= fourier_order; ++h) {
            const double angle = 2.0 * std::numbers::pi * double(h) * t(i) / period;
            fourier(i, h - 1) = std::cos(angle);
            fourier(i, fourier_order + h - 1) = std::sin(angle);
        }
    }
}

double neg_log_posterior(const Eigen::VectorXd& packed, const MapData& data,
                         Eigen::VectorXd& grad) {
    const Eigen::Index s_count = data.changepoints.size();
    const Eigen::Index beta_count = 2 * data.fourier_order;
    if (packed.size() != 2 + s_count + beta_count) {
        throw std::invalid_argument("neg_log_posterior: wrong parameter count");
    }
    const double k = packed(0);
    const double m = packed(1);
    const auto delta = packed.segment(2, s_count);
    const auto beta = packed.tail(beta_count);

    Eigen::VectorXd yhat = k * data.t;
    yhat.array() += m;
    if (s_count > 0) {
        yhat += data.hinge * delta;
    }
    if (beta_count > 0) {
        yhat += data.fourier * beta;
    }
    const Eigen::VectorXd r = data.y - yhat;

    const Eigen::ArrayXd psi = (delta.array().square() + kSmoothEps * kSmoothEps).sqrt();
    const double value = 0.5 * r.squaredNorm() + psi.sum() / data.tau +
                         beta.squaredNorm() / (2.0 * data.sigma_season * data.sigma_season);

    grad.resize(packed.size());
    grad(0) = -r.dot(data.t);
    grad(1) = -r.sum();
    if (s_count > 0) {
        grad.segment(2, s_count) =
            -data.hinge.transpose() * r + ((delta.array() / psi) / data.tau).matrix();
    }
    if (beta_count > 0) {
        grad.tail(beta_count) =
            -data.fourier.transpose() * r + beta / (data.sigma_season * data.sigma_season);
    }
    return value;
}

AdditiveParams fit_map(const DatedSeries& train, const AdditiveConfig& config) {
    validate_series(train, "fit_map");
    const std::size_t n = train.size();
    if (std::size_t(config.changepoints) > n) {
        throw std::invalid_argument("fit_map: more changepoints than observations");
    }
    if (n < 2 * std::size_t(config.changepoints)) {
        std::cerr << "fit_map: only " << n << " observations for " << config.changepoints
                  << " changepoints; the trend is weakly constrained\n";
    }

    const Eigen::Index rows = Eigen::Index(n);
    std::vector<Date> dates(n);
    Eigen::VectorXd t_raw(rows);
    Eigen::VectorXd y(rows);
    for (std::size_t i = 0; i < n; ++i) {
        dates[i] = train[i].first;
        t_raw(Eigen::Index(i)) = double(days_since_epoch(train[i].first));
        y(Eigen::Index(i)) = train[i].second;
    }
    const double t0 = t_raw(0);
    const double span = t_raw(rows - 1) - t0;
    const double y_scale = y.cwiseAbs().maxCoeff();
    if (y_scale <= 0.0) {
        throw std::invalid_argument("fit_map: all observations are zero");
    }

    // Normalised problem: time in [0, 1], values in [-1, 1]. The period and
    // the changepoints shrink by the same factor, so the model is the same
    // function of calendar time.
    const Eigen::VectorXd u = (t_raw.array() - t0) / span;
    const Eigen::VectorXd y_n = y / y_scale;
    const Eigen::VectorXd s_days = place_changepoints(dates, config.changepoints,
                                                      config.changepoint_fraction);
    const Eigen::VectorXd u_s = (s_days.array() - t0) / span;
    const MapData data(u, y_n, u_s, config.tau, config.sigma_season, config.fourier_order,
                       config.period_days / span);

    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2 + u_s.size() + 2 * config.fourier_order);
    x0(0) = y_n(rows - 1) - y_n(0);     // straight-line slope guess
    x0(1) = y_n(0);
    const auto solution = optim::lbfgs_minimize(
        [&data](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
            return neg_log_posterior(x, data, g);
        },
        x0, config.solver);

    // Back to euros and days. Trend: k = k' y/T, m picks up the shift of
    // the time origin. Seasonality: the normalised fit used angles
    // 2 pi h (t - t0) / P, so each harmonic rotates by 2 pi h t0 / P when
    // re-expressed against absolute time.
    const Eigen::VectorXd x = solution.x;
    AdditiveParams params;
    params.base_rate = x(0) * y_scale / span;
    params.offset = x(1) * y_scale - params.base_rate * t0;
    params.rate_adjust = x.segment(2, u_s.size()) * y_scale / span;
    params.changepoints = s_days;
    params.period_days = config.period_days;
    params.season_cos.resize(config.fourier_order);
    params.season_sin.resize(config.fourier_order);
    for (int h = 1; h <= config.fourier_order; ++h) {
        const double a_n = x(2 + u_s.size() + h - 1);
        const double b_n = x(2 + u_s.size() + config.fourier_order + h - 1);
        const double phase = 2.0 * std::numbers::pi * double(h) * t0 / config.period_days;
        params.season_cos(h - 1) = y_scale * (a_n * std::cos(phase) - b_n * std::sin(phase));
        params.season_sin(h - 1) = y_scale * (a_n * std::sin(phase) + b_n * std::cos(phase));
    }
    return params;
}

std::vector<double> default_tau_grid() {
    return {0.005, 0.01, 0.05, 0.1, 0.5};
}

std::vector<double> default_sigma_grid() {
    return {0.01, 0.05, 0.1, 0.5, 1.0, 2.0};
}

AdditiveGridResult grid_search_additive(const weekly::WeeklySeries& train,
                                        const weekly::WeeklySeries& valid,
                                        const std::vector<double>& tau_grid,
                                        const std::vector<double>& sigma_grid,
                                        const AdditiveConfig& base, int jobs) {
    if (tau_grid.empty() || sigma_grid.empty()) {
        throw std::invalid_argument("grid_search_additive: empty grid");
    }
    if (train.empty() || valid.empty()) {
        throw std::invalid_argument("grid_search_additive: empty partition");
    }
    if (!(train.rows.back().week_start < valid.rows.front().week_start)) {
        throw std::invalid_argument("grid_search_additive: partitions out of order");
    }

    const std::size_t cell_count = tau_grid.size() * sigma_grid.size();
    std::vector<AdditiveGridCell> cells(cell_count);
    const DatedSeries train_observed = observed_rows(train);

    parallel_for(cell_count, jobs, [&](std::size_t c) {
        AdditiveGridCell& cell = cells[c];
        cell.tau = tau_grid[c / sigma_grid.size()];
        cell.sigma_season = sigma_grid[c % sigma_grid.size()];
        AdditiveConfig config = base;
        config.tau = cell.tau;
        config.sigma_season = cell.sigma_season;
        try {
            DatedSeries fit_rows = train_observed;
            double sq_sum = 0.0;
            for (const auto& row : valid.rows) {
                const AdditiveParams params = fit_map(fit_rows, config);
                const double err = predict(params, row.week_start) - row.avg_price;
                sq_sum += err * err;
                if (!row.interpolated) {
                    fit_rows.emplace_back(row.week_start, row.avg_price);
                }
            }
            cell.valid_rmse = std::sqrt(sq_sum / double(valid.size()));
            if (!std::isfinite(cell.valid_rmse)) {
                cell.failed = true;
                cell.valid_rmse = std::numeric_limits<double>::infinity();
            }
        } catch (const std::exception&) {
            cell.failed = true;
            cell.valid_rmse = std::numeric_limits<double>::infinity();
        }
    });

    AdditiveGridResult result;
    result.cells = cells;
    std::size_t best_index = cell_count;
    double best_rmse = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cell_count; ++c) {
        if (cells[c].failed) {
            continue;
        }
        // Strictly-better wins; near-ties prefer the stronger prior, the
        // smaller tau first and then the smaller sigma. The tolerance is
        // loose because sub-microcent RMSE differences are solver noise,
        // not evidence.
        if (!std::isfinite(cells[c].valid_rmse)) {
            continue;
        }
        if (best_index == cell_count) {
            best_rmse = cells[c].valid_rmse;
            best_index = c;
            continue;
        }
        const double tol = 1e-7 * std::max(1.0, best_rmse);
        const bool better = cells[c].valid_rmse < best_rmse - tol;
        const bool tied = !better && cells[c].valid_rmse < best_rmse + tol;
        const bool stronger_prior =
            cells[c].tau < cells[best_index].tau ||
            (cells[c].tau == cells[best_index].tau &&
             cells[c].sigma_season < cells[best_index].sigma_season);
        if (better || (tied && stronger_prior)) {
            best_rmse = std::min(best_rmse, cells[c].valid_rmse);
            best_index = c;
        }
    }
    if (best_index == cell_count) {
        throw std::runtime_error("grid_search_additive: every cell failed to fit");
    }
    result.best = base;
    result.best.tau = cells[best_index].tau;
    result.best.sigma_season = cells[best_index].sigma_season;
    result.valid_rmse = best_rmse;
    return result;
}

AdditiveEval expanding_window_eval(const AdditiveConfig& config,
                                   const weekly::WeeklySeries& history, Date eval_start) {
    std::size_t first_eval = history.size();
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (history.rows[i].week_start >= eval_start) {
            first_eval = i;
            break;
        }
    }
    if (first_eval == history.size()) {
        throw std::invalid_argument("expanding_window_eval: no rows at or after eval_start");
    }
    if (first_eval == 0) {
        throw std::invalid_argument("expanding_window_eval: no history before eval_start");
    }

    DatedSeries fit_rows;
    for (std::size_t i = 0; i < first_eval; ++i) {
        const auto& row = history.rows[i];
        if (!row.interpolated) {
            fit_rows.emplace_back(row.week_start, row.avg_price);
        }
    }

    AdditiveEval out;
    for (std::size_t i = first_eval; i < history.size(); ++i) {
        const auto& row = history.rows[i];
        const AdditiveParams params = fit_map(fit_rows, config);
        const double predicted = predict(params, row.week_start);
        out.forecasts.add(row.week_start, history.rows[i - 1].avg_price, row.avg_price,
                          predicted);
        if (!row.interpolated) {
            fit_rows.emplace_back(row.week_start, row.avg_price);
        }
    }
    out.metrics = metrics::compute_metrics(out.forecasts);
    return out;
}

}
