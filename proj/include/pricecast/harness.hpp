#pragma once

#include "pricecast/additive.hpp"
#include "pricecast/arima.hpp"
#include "pricecast/ingest.hpp"
#include "pricecast/metrics.hpp"
#include "pricecast/neural/training.hpp"
#include "pricecast/weekly.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pricecast::harness {

/**
 * @brief Synthetic price path whose log increments follow a Gaussian ARMA.
 *
 * The innovations drive w_t = sum phi_i w_{t-i} + e_t + sum theta_j e_{t-j}
 * after a 200-step burn-in; with d = 1 the w are accumulated into log
 * prices anchored at base_price, with d = 0 they are the log prices
 * directly. An AR polynomial with a root on or inside the unit circle is
 * rejected.
 */
std::vector<double> simulate_arima(const arima::ArimaSpec& spec, const std::vector<double>& phi,
                                   const std::vector<double>& theta, double sigma,
                                   std::size_t n, std::uint64_t seed,
                                   double base_price = 100.0);

/// Piecewise-linear trend with one slope change plus a single yearly sine
/// harmonic and Gaussian noise, sampled weekly. Time units are days from
/// the first observation; the slope change applies from changepoint_day on.
struct TrendSeasonConfig {
    double slope = 0.01;               // euros per day before the changepoint
    double intercept = 10.0;           // value at the first observation
    double changepoint_day = 0.0;
    double slope_change = 0.0;         // added to the slope after the changepoint
    double amplitude = 0.0;            // yearly sine amplitude
    double noise_sigma = 0.0;
    std::size_t weeks = 120;
    std::uint64_t seed = 0;
    Date start = std::chrono::sys_days(std::chrono::year(2018) / 1 / 1);  // a Monday
};

additive::DatedSeries simulate_trend_season(const TrendSeasonConfig& config);

/// Synthetic wholesale orders around a slowly drifting weekly price, with
/// several orders per week, varying quantities, a handful of customers,
/// and occasional gross price outliers. Exercises the whole ingest stage.
struct SyntheticOrdersConfig {
    std::string article = "100001";
    Date start = std::chrono::sys_days(std::chrono::year(2018) / 1 / 1);
    std::size_t weeks = 250;
    int orders_per_week = 6;
    double base_price = 10.0;
    double weekly_sigma = 0.01;        // relative week-to-week price drift
    double order_sigma = 0.002;        // relative within-week price spread
    double outlier_rate = 0.0;         // chance of a 10x misprint per order
    std::uint64_t seed = 0;
};

std::vector<ingest::OrderRecord> simulate_orders(const SyntheticOrdersConfig& config);

void write_orders_csv(const std::vector<ingest::OrderRecord>& records,
                      const std::filesystem::path& path);

/// Everything run_pipeline needs, loadable from one JSON file. Paths are
/// used as written, so relative paths resolve against the working
/// directory.
struct PipelineConfig {
    std::filesystem::path orders_csv;
    std::string article;
    Date cutoff = std::chrono::sys_days(std::chrono::year(2100) / 1 / 1);
    double zscore_threshold = 4.0;
    int gap_max = 4;
    Date train_end;
    Date valid_end;
    weekly::ScalerKind scaler = weekly::ScalerKind::MinMax;

    int arima_pmax = 3;
    int arima_qmax = 3;
    int arima_d = 1;
    bool arima_refit = false;

    additive::AdditiveConfig additive;
    std::vector<double> tau_grid = additive::default_tau_grid();
    std::vector<double> sigma_grid = additive::default_sigma_grid();

    int nn_repeats_a = 10;
    int nn_repeats_b = 2;
    neural::TrainConfig train;
    int nn_config_limit = 0;           // > 0 truncates both grids, for smoke runs

    std::uint64_t seed = 0;
    int jobs = 1;
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct FamilyOutcome {
    metrics::MetricsReport metrics;
    bool beats_naive = false;
    double tuning_seconds = 0.0;
    nlohmann::json selection;          // family-specific tuning outcome
};

/// Per-family test metrics on one shared set of test weeks, plus the
/// no-change baseline.
struct ComparisonReport {
    std::vector<Date> test_weeks;
    metrics::MetricsReport naive;
    std::vector<std::pair<std::string, FamilyOutcome>> families;
};

struct PipelineResult {
    ComparisonReport report;
    std::map<std::string, metrics::ForecastSeries> forecasts;
};

/**
 * @brief The full comparison: ingest, weekly aggregation, per-family
 * tuning under each family's own protocol, and one-step test evaluation
 * on identical weeks.
 *
 * Writes report.json, timings.json, forecast_<family>.csv, and
 * grid_<family>.csv into out_dir. Every file write is atomic. Wall-clock
 * times go to timings.json only, so report.json is byte-identical across
 * reruns with the same seed and inputs (delete leftover grid csvs when
 * changing the seed, they resume). Any stage failure is rethrown with the
 * stage name prefixed.
 */
PipelineResult run_pipeline(const PipelineConfig& config,
                            const std::filesystem::path& out_dir);

nlohmann::json report_to_json(const ComparisonReport& report);

void write_report(const ComparisonReport& report, const std::filesystem::path& path);

}
