#pragma once

#include "pricecast/calendar.hpp"
#include "pricecast/ingest.hpp"

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <utility>
#include <vector>

namespace pricecast::weekly {

/// One week of aggregated trading, keyed by its Monday. The nine numeric
/// fields (quantity through avg_price) are the model inputs; `interpolated`
/// marks rows synthesised by fill_gaps and is carried alongside but never
/// fed to a model.
struct WeeklyRow {
    Date week_start{};
    double quantity = 0.0;
    double customers = 0.0;
    double orders = 0.0;
    double on_sale = 0.0;
    double cost = 0.0;
    double week_cos = 0.0;
    double week_sin = 0.0;
    double price_std = 0.0;
    double avg_price = 0.0;
    bool interpolated = false;
};

struct WeeklySeries {
    std::vector<WeeklyRow> rows;
    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
};

struct SplitSeries {
    WeeklySeries train;
    WeeklySeries valid;
    WeeklySeries test;
};

/// Cyclic encoding of the zero-based week-of-year index w:
/// (cos, sin) of 2*pi*w / 52.1429. The denominator is the average number of
/// ISO weeks in a year, so week 52 lands next to week 0 instead of a year
/// apart.
std::pair<double, double> time_embedding(int week_of_year);

/// Buckets orders into ISO weeks (Monday keyed) and aggregates each bucket:
/// summed quantity, distinct customers, order count, on-offer order count,
/// quantity-weighted mean cost, the time embedding, and the
/// quantity-weighted standard deviation and mean of unit price. Weeks with
/// no orders are simply absent from the result.
WeeklySeries resample_weekly(const std::vector<ingest::OrderRecord>& records);

/// Drops the sparse early history: everything up to and including the last
/// gap longer than `gap_max` weeks between consecutive observed weeks. The
/// series keeps only the final stretch in which every gap is small enough
/// for interpolation to be honest.
WeeklySeries trim_leading_gap(const WeeklySeries& series, int gap_max = 4);

/// Fills the remaining missing Mondays by linear interpolation of the
/// continuous fields (cost, price_std, avg_price). Count fields are zero,
/// the embedding is recomputed from the inserted week's own date, and the
/// row is flagged interpolated. A gap longer than `gap_max` weeks throws:
/// such series must be trimmed first.
WeeklySeries fill_gaps(const WeeklySeries& series, int gap_max = 4);

/// Chronological split at two inclusive boundary dates:
/// train <= train_end < valid <= valid_end < test.
SplitSeries split_series(const WeeklySeries& series, Date train_end, Date valid_end);

/// The nine numeric columns as a rows-by-9 matrix, in field order
/// (quantity, customers, orders, on_sale, cost, week_cos, week_sin,
/// price_std, avg_price).
Eigen::MatrixXd input_matrix(const WeeklySeries& series);

enum class ScalerKind { MinMax, ZScore };

/**
 * @brief Per-column affine scaler fitted on training rows only.
 *
 * MinMax maps each training column onto [0, 1]; ZScore centres and divides
 * by the standard deviation. A constant column maps to 0 in both modes.
 * Later partitions reuse the training parameters unchanged, so test rows
 * may land outside [0, 1].
 */
struct Scaler {
    ScalerKind kind = ScalerKind::MinMax;
    Eigen::VectorXd col_min;
    Eigen::VectorXd col_max;
    Eigen::VectorXd col_mean;
    Eigen::VectorXd col_std;
};

Scaler fit_scaler(const WeeklySeries& train, ScalerKind kind = ScalerKind::MinMax);

Eigen::MatrixXd apply_scaler(const Scaler& scaler, const WeeklySeries& series);
Eigen::MatrixXd apply_scaler(const Scaler& scaler, const Eigen::MatrixXd& columns);

/// Supervised windows for the sequence models. Window t covers scaled rows
/// [t-n+1, t] and its target is the next week's price change
/// price[t+1] - price[t], in euros on the unscaled series. target_rows
/// records t+1, the row index of the predicted week.
struct WindowSet {
    std::vector<Eigen::MatrixXd> inputs;
    Eigen::VectorXd targets;
    std::vector<std::size_t> target_rows;
    int window = 0;
    std::size_t size() const { return inputs.size(); }
};

WindowSet make_supervised(const Eigen::MatrixXd& scaled, const std::vector<double>& price,
                          int window);

/// Everything the sequence-model stages need in one place: the scaled input
/// matrix over the full series, the raw prices, the week dates, and the row
/// indices where validation and test begin.
struct SeriesTensor {
    Eigen::MatrixXd scaled;
    std::vector<double> price;
    std::vector<Date> week_start;
    std::size_t valid_begin = 0;
    std::size_t test_begin = 0;
};

SeriesTensor make_tensor(const WeeklySeries& full, const Scaler& scaler, Date train_end,
                         Date valid_end);

/// Partitions windows by the partition of their target row: targets before
/// valid_begin train, before test_begin validate, the rest test.
std::array<WindowSet, 3> split_windows(const WindowSet& all, std::size_t valid_begin,
                                       std::size_t test_begin);

void save_weekly_csv(const WeeklySeries& series, const std::filesystem::path& path);
WeeklySeries load_weekly_csv(const std::filesystem::path& path);

}
