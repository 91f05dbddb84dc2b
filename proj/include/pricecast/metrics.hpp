#pragma once

#include "pricecast/calendar.hpp"

#include <cstddef>
#include <filesystem>
#include <vector>

namespace pricecast::metrics {

/// Observed and predicted prices for a run of forecast weeks, together
/// with the week-over-week increments both are measured against. Kept as
/// parallel columns because that is exactly the CSV layout.
struct ForecastSeries {
    std::vector<Date> week_start;
    std::vector<double> price;         // observed p_t, euros
    std::vector<double> price_hat;     // predicted, euros
    std::vector<double> delta;         // p_t - p_{t-1}
    std::vector<double> delta_hat;     // price_hat - p_{t-1}

    void add(Date week, double prev_price, double observed, double predicted);
    std::size_t size() const { return week_start.size(); }
};

struct MetricsReport {
    double rmse = 0.0;
    double mae = 0.0;
    double mape = 0.0;
    std::size_t weeks = 0;
};

/// RMSE and MAE are measured on the increments (equivalently on the level
/// errors, since both forecasts share the observed previous price); MAPE
/// is measured on the price levels. Throws on an empty series or if any
/// value involved is non-finite or a level is zero.
MetricsReport compute_metrics(const ForecastSeries& fs);

/// The same measures for the no-change baseline that predicts a zero
/// increment every week.
MetricsReport naive_metrics(const ForecastSeries& fs);

void save_forecast_csv(const ForecastSeries& fs, const std::filesystem::path& path);
ForecastSeries load_forecast_csv(const std::filesystem::path& path);

}
