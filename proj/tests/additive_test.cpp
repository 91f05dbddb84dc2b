#include "pricecast/additive.hpp"

#include "pricecast/rng.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

using namespace pricecast;
using testsupport::monday;

namespace {

std::vector<Date> weekly_dates(Date start, int count) {
    std::vector<Date> dates;
    for (int i = 0; i < count; ++i) {
        dates.push_back(start + std::chrono::days(7 * i));
    }
    return dates;
}

additive::DatedSeries line_series(Date start, int weeks, double slope_per_day,
                                  double intercept) {
    additive::DatedSeries out;
    for (int i = 0; i < weeks; ++i) {
        const Date d = start + std::chrono::days(7 * i);
        const double t = double(days_since_epoch(d));
        out.emplace_back(d, slope_per_day * t + intercept);
    }
    return out;
}

additive::AdditiveParams random_params(Rng& rng, int changepoint_count, int order) {
    additive::AdditiveParams params;
    params.base_rate = rng.normal(0.0, 0.01);
    params.offset = rng.normal(5.0, 1.0);
    params.rate_adjust = Eigen::VectorXd::Zero(changepoint_count);
    params.changepoints = Eigen::VectorXd::Zero(changepoint_count);
    for (int i = 0; i < changepoint_count; ++i) {
        params.rate_adjust(i) = rng.normal(0.0, 0.005);
        params.changepoints(i) = 100.0 + 50.0 * double(i) + rng.uniform();
    }
    params.season_cos = Eigen::VectorXd::Zero(order);
    params.season_sin = Eigen::VectorXd::Zero(order);
    for (int i = 0; i < order; ++i) {
        params.season_cos(i) = rng.normal(0.0, 0.5);
        params.season_sin(i) = rng.normal(0.0, 0.5);
    }
    return params;
}

}

TEST_CASE("place_changepoints spaces the grid over the early history") {
    SUBCASE("a single changepoint sits at the end of the covered span") {
        // 101 weekly dates span 700 days, so 80% of the span ends at day 560.
        const auto cps = additive::place_changepoints(
            weekly_dates(from_days_since_epoch(0), 101), 1, 0.8);
        REQUIRE(cps.size() == 1);
        CHECK(cps(0) == doctest::Approx(560.0).epsilon(1e-12));
    }
    SUBCASE("fraction one covers the whole span") {
        // 101 weekly dates span 700 days; two changepoints at the half and
        // the end.
        const auto cps = additive::place_changepoints(
            weekly_dates(from_days_since_epoch(0), 101), 2, 1.0);
        REQUIRE(cps.size() == 2);
        CHECK(cps(0) == doctest::Approx(350.0));
        CHECK(cps(1) == doctest::Approx(700.0));
    }
    SUBCASE("more changepoints than observations is an error") {
        const auto dates = weekly_dates(monday(2018, 1, 1), 5);
        CHECK_THROWS(additive::place_changepoints(dates, 6, 0.8));
        CHECK_THROWS(additive::place_changepoints(dates, 0, 0.8));
    }
}

TEST_CASE("trend_eval is a plain line without rate adjustments") {
    additive::AdditiveParams params;
    params.base_rate = 2.0;
    params.offset = 1.0;
    params.rate_adjust = Eigen::VectorXd::Zero(0);
    params.changepoints = Eigen::VectorXd::Zero(0);
    params.season_cos = Eigen::VectorXd::Zero(0);
    params.season_sin = Eigen::VectorXd::Zero(0);
    CHECK(additive::trend_eval(params, 0.0) == doctest::Approx(1.0));
    CHECK(additive::trend_eval(params, 10.0) == doctest::Approx(21.0));
    CHECK(additive::predict(params, 10.0) == doctest::Approx(21.0));
}

TEST_CASE("the trend stays continuous across changepoints") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        auto params = random_params(rng, 4, 0);
        for (Eigen::Index j = 0; j < params.changepoints.size(); ++j) {
            const double s = params.changepoints(j);
            const double left = additive::trend_eval(params, s - 1e-7);
            const double right = additive::trend_eval(params, s + 1e-7);
            CHECK(std::abs(left - right) < 1e-6);
        }
    }
}

TEST_CASE("the slope after a changepoint is the base rate plus its adjustment") {
    additive::AdditiveParams params;
    params.base_rate = 0.5;
    params.offset = 2.0;
    params.rate_adjust = Eigen::VectorXd::Constant(1, 0.25);
    params.changepoints = Eigen::VectorXd::Constant(1, 100.0);
    params.season_cos = Eigen::VectorXd::Zero(0);
    params.season_sin = Eigen::VectorXd::Zero(0);

    const double h = 1.0;
    const double before = (additive::trend_eval(params, 50.0 + h) -
                           additive::trend_eval(params, 50.0)) / h;
    const double after = (additive::trend_eval(params, 200.0 + h) -
                          additive::trend_eval(params, 200.0)) / h;
    CHECK(before == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(after == doctest::Approx(0.75).epsilon(1e-10));
}

TEST_CASE("seasonality evaluates the Fourier sum and repeats each period") {
    additive::AdditiveParams params;
    params.rate_adjust = Eigen::VectorXd::Zero(0);
    params.changepoints = Eigen::VectorXd::Zero(0);
    params.season_cos = Eigen::VectorXd::Zero(2);
    params.season_sin = Eigen::VectorXd::Zero(2);
    CHECK(additive::seasonality_eval(params, 123.0) == doctest::Approx(0.0));

    params.season_cos(0) = 1.0;
    CHECK(additive::seasonality_eval(params, params.period_days) ==
          doctest::Approx(1.0).epsilon(1e-12));

    Rng rng(3);
    auto noisy = random_params(rng, 0, 5);
    for (const double t : {0.0, 17.5, 200.0, 1234.5}) {
        CHECK(additive::seasonality_eval(noisy, t) ==
              doctest::Approx(additive::seasonality_eval(noisy, t + noisy.period_days))
                  .epsilon(1e-9));
    }
}

TEST_CASE("predict adds trend and seasonality and is deterministic") {
    Rng rng(11);
    const auto params = random_params(rng, 3, 4);
    for (const double t : {0.0, 150.0, 400.0}) {
        CHECK(additive::predict(params, t) ==
              doctest::Approx(additive::trend_eval(params, t) +
                              additive::seasonality_eval(params, t))
                  .epsilon(1e-12));
        CHECK(additive::predict(params, t) == additive::predict(params, t));
    }
    CHECK(additive::predict(params, from_days_since_epoch(150)) ==
          doctest::Approx(additive::predict(params, 150.0)));
}

TEST_CASE("the MAP objective is near zero for zero parameters and zero data") {
    const int S = 25;
    const int N = 10;
    additive::MapData data(Eigen::VectorXd::LinSpaced(10, 0.0, 1.0),
                           Eigen::VectorXd::Zero(10),
                           Eigen::VectorXd::LinSpaced(S, 0.1, 0.8), 0.05, 1.0, N, 1.0);
    const Eigen::VectorXd packed = Eigen::VectorXd::Zero(2 + S + 2 * N);
    Eigen::VectorXd grad;
    const double value = additive::neg_log_posterior(packed, data, grad);
    // The smoothed Laplace prior contributes S * eps / tau at delta = 0.
    CHECK(value < 1e-4);
    CHECK(value >= 0.0);
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("the analytic MAP gradient matches finite differences") {
    Rng rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        const int S = 3 + int(rng.below(4));
        const int N = 1 + int(rng.below(3));
        const int rows = 25;
        Eigen::VectorXd t(rows);
        Eigen::VectorXd y(rows);
        for (int i = 0; i < rows; ++i) {
            t(i) = double(i) / double(rows - 1);
            y(i) = rng.normal(0.0, 1.0);
        }
        Eigen::VectorXd cps(S);
        for (int j = 0; j < S; ++j) {
            cps(j) = (double(j) + 0.5) / double(S);
        }
        additive::MapData data(t, y, cps, 0.05, 0.5, N, 0.3);

        Eigen::VectorXd packed(2 + S + 2 * N);
        for (Eigen::Index i = 0; i < packed.size(); ++i) {
            packed(i) = rng.normal(0.0, 0.3);
        }
        Eigen::VectorXd grad;
        additive::neg_log_posterior(packed, data, grad);
        const auto value_of = [&](const Eigen::VectorXd& x) {
            Eigen::VectorXd g;
            return additive::neg_log_posterior(x, data, g);
        };
        const Eigen::VectorXd fd = testsupport::fd_gradient(value_of, packed, 1e-6);
        CHECK(testsupport::max_rel_error(grad, fd, 1e-4) < 1e-5);
    }
}

TEST_CASE("fit_map recovers a noiseless line") {
    const auto train = line_series(from_days_since_epoch(0), 100, 2.0, 1.0);
    additive::AdditiveConfig config;
    config.tau = 0.005;
    config.changepoints = 10;
    const auto params = additive::fit_map(train, config);
    CHECK(params.base_rate == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(params.offset == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(params.rate_adjust.cwiseAbs().maxCoeff() < 1e-3);

    // In-sample predictions reproduce the line, and one week past the end
    // the final segment extrapolates it.
    for (const auto& [date, value] : train) {
        CHECK(additive::predict(params, date) == doctest::Approx(value).epsilon(1e-4));
    }
    const Date ahead = train.back().first + std::chrono::days(7);
    CHECK(additive::predict(params, ahead) ==
          doctest::Approx(2.0 * double(days_since_epoch(ahead)) + 1.0).epsilon(1e-3));
}

TEST_CASE("fit_map recovers a single harmonic") {
    additive::DatedSeries train;
    const Date start = monday(2018, 1, 1);
    const double period = 365.25;
    for (int i = 0; i < 208; ++i) {
        const Date d = start + std::chrono::days(7 * i);
        const double t = double(days_since_epoch(d));
        train.emplace_back(d, 3.0 + 0.5 * std::sin(2.0 * std::numbers::pi * t / period));
    }
    additive::AdditiveConfig config;
    config.tau = 0.005;
    config.sigma_season = 5.0;
    config.changepoints = 5;
    const auto params = additive::fit_map(train, config);

    CHECK(params.season_sin(0) == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(params.season_cos(0)) < 5e-3);
    for (Eigen::Index nharm = 1; nharm < params.season_cos.size(); ++nharm) {
        CHECK(std::abs(params.season_cos(nharm)) < 1e-3);
        CHECK(std::abs(params.season_sin(nharm)) < 1e-3);
    }
    CHECK(params.base_rate == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(params.offset == doctest::Approx(3.0).epsilon(1e-2));
}

namespace {

/// Flat for the first half, then a steep climb. The single straight line a
/// tight changepoint prior forces leaves large residuals, so a loose prior
/// has something real to gain by bending.
additive::DatedSeries hockey_stick(std::uint64_t seed, int weeks = 240,
                                   double noise = 0.2) {
    Rng rng(seed);
    additive::DatedSeries out;
    const Date start = monday(2018, 1, 1);
    const int break_week = weeks / 2;
    for (int i = 0; i < weeks; ++i) {
        const Date d = start + std::chrono::days(7 * i);
        const double rise = i > break_week ? 1.0 * double(i - break_week) : 0.0;
        out.emplace_back(d, 10.0 + rise + rng.normal(0.0, noise));
    }
    return out;
}

double train_rmse(const additive::DatedSeries& train, double tau) {
    additive::AdditiveConfig config;
    config.tau = tau;
    const auto params = additive::fit_map(train, config);
    double ssq = 0.0;
    for (const auto& [date, value] : train) {
        const double err = additive::predict(params, date) - value;
        ssq += err * err;
    }
    return std::sqrt(ssq / double(train.size()));
}

}

TEST_CASE("looser tau lets the trend bend at a slope break") {
    int looser_wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        if (train_rmse(hockey_stick(seed), 0.5) <= train_rmse(hockey_stick(seed), 0.005)) {
            ++looser_wins;
        }
    }
    CHECK(looser_wins >= 8);
}

TEST_CASE("shrinkage is monotone in tau") {
    int monotone = 0;
    const int trials = 10;
    for (int trial = 0; trial < trials; ++trial) {
        const auto train = hockey_stick(100 + std::uint64_t(trial));
        double previous = -1.0;
        bool ordered = true;
        bool any_bend = false;
        for (const double tau : {0.5, 0.05, 0.005}) {
            additive::AdditiveConfig config;
            config.tau = tau;
            const auto params = additive::fit_map(train, config);
            const double l1 = params.rate_adjust.cwiseAbs().sum();
            if (previous >= 0.0 && l1 > previous + 1e-5) {
                ordered = false;
            }
            if (l1 > 1e-6) {
                any_bend = true;
            }
            previous = l1;
        }
        if (ordered && any_bend) {
            ++monotone;
        }
    }
    CHECK(monotone >= 9);
}

TEST_CASE("grid search picks the least validation RMSE with regular ties") {
    const auto series = testsupport::weekly_from_prices(
        std::vector<double>(40, 5.0), monday(2018, 1, 1));
    weekly::WeeklySeries train;
    weekly::WeeklySeries valid;
    train.rows.assign(series.rows.begin(), series.rows.begin() + 30);
    valid.rows.assign(series.rows.begin() + 30, series.rows.end());

    additive::AdditiveConfig base;
    base.changepoints = 5;
    SUBCASE("a single cell comes straight back") {
        const auto result = additive::grid_search_additive(train, valid, {0.1}, {0.7}, base);
        CHECK(result.best.tau == doctest::Approx(0.1));
        CHECK(result.best.sigma_season == doctest::Approx(0.7));
        CHECK(result.cells.size() == 1);
    }
    SUBCASE("constant data ties every cell, so the strongest prior wins") {
        const auto result = additive::grid_search_additive(train, valid, {0.5, 0.005},
                                                           {1.0, 0.01}, base);
        CHECK(result.cells.size() == 4);
        CHECK(result.best.tau == doctest::Approx(0.005));
        CHECK(result.best.sigma_season == doctest::Approx(0.01));
        CHECK(result.valid_rmse == doctest::Approx(0.0).epsilon(1e-6));
    }
    SUBCASE("empty grids are rejected") {
        CHECK_THROWS(additive::grid_search_additive(train, valid, {}, {1.0}, base));
    }
}

TEST_CASE("default grids match the documented five by six layout") {
    const auto taus = additive::default_tau_grid();
    const auto sigmas = additive::default_sigma_grid();
    CHECK(taus == std::vector<double>{0.005, 0.01, 0.05, 0.1, 0.5});
    CHECK(sigmas == std::vector<double>{0.01, 0.05, 0.1, 0.5, 1.0, 2.0});
    CHECK(taus.size() * sigmas.size() == 30);
}

TEST_CASE("expanding_window_eval scores exactly the requested weeks") {
    auto series = testsupport::weekly_from_prices(
        {10.0, 10.2, 10.4, 10.6, 10.8, 11.0, 11.2, 11.4, 11.6, 11.8,
         12.0, 12.2, 12.4, 12.6, 12.8, 13.0, 13.2, 13.4, 13.6, 13.8,
         14.0, 14.2, 14.4, 14.6, 14.8, 15.0, 15.2, 15.4, 15.6, 15.8},
        monday(2018, 1, 1));

    additive::AdditiveConfig config;
    config.tau = 0.05;
    config.changepoints = 5;
    SUBCASE("a single evaluation week gives rmse equal to the absolute error") {
        const Date last = series.rows.back().week_start;
        const auto eval = additive::expanding_window_eval(config, series, last);
        CHECK(eval.forecasts.size() == 1);
        CHECK(eval.metrics.weeks == 1);
        CHECK(eval.metrics.rmse == doctest::Approx(eval.metrics.mae).epsilon(1e-12));
    }
    SUBCASE("a clean linear trend is forecast to within a few cents") {
        const Date eval_start = series.rows[25].week_start;
        const auto eval = additive::expanding_window_eval(config, series, eval_start);
        CHECK(eval.forecasts.size() == 5);
        CHECK(eval.metrics.rmse < 0.05);
        for (std::size_t i = 0; i < eval.forecasts.size(); ++i) {
            CHECK(std::abs(eval.forecasts.delta_hat[i] - 0.2) < 0.05);
        }
    }
    SUBCASE("interpolated rows are forecast but never fitted on") {
        auto holed = series;
        holed.rows.erase(holed.rows.begin() + 27);
        const auto filled = weekly::fill_gaps(holed, 4);
        REQUIRE(filled.size() == series.size());
        CHECK(filled.rows[27].interpolated);
        const Date eval_start = filled.rows[25].week_start;
        const auto eval = additive::expanding_window_eval(config, filled, eval_start);
        CHECK(eval.forecasts.size() == 5);
        CHECK(eval.metrics.rmse < 0.1);
    }
}

TEST_CASE("a constant history forecasts a flat line") {
    const auto series = testsupport::weekly_from_prices(
        std::vector<double>(30, 7.5), monday(2018, 1, 1));
    additive::AdditiveConfig config;
    config.changepoints = 5;
    const auto eval = additive::expanding_window_eval(config, series,
                                                      series.rows[26].week_start);
    CHECK(eval.forecasts.size() == 4);
    for (const double dhat : eval.forecasts.delta_hat) {
        CHECK(std::abs(dhat) < 1e-5);
    }
    CHECK(eval.metrics.rmse == doctest::Approx(0.0).epsilon(1e-8));
}
