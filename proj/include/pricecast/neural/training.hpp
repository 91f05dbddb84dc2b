#pragma once

#include "pricecast/neural/network.hpp"
#include "pricecast/weekly.hpp"

#include <filesystem>
#include <map>
#include <vector>

namespace pricecast::neural {

/// Optimizer and stopping constants shared by every training run. The
/// learning rate is part of NetworkSpec because the grid searches over it.
struct TrainConfig {
    int batch_size = 32;
    int max_epochs = 150;
    int patience = 5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::uint64_t seed = 0;
};

void validate_train_config(const TrainConfig& config);

/// First and second moment accumulators over the flat parameter vector.
struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;

    explicit AdamState(Eigen::Index n)
        : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// One bias-corrected Adam update in place.
void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state,
               double alpha, const TrainConfig& config);

struct TrainResult {
    NetworkParams params;                // weights from the best validation epoch
    std::vector<double> train_history;   // mean minibatch mse per epoch, dropout active
    std::vector<double> valid_history;   // inference-mode validation mse per epoch
    int stopped_epoch = 0;               // 1-based index of the last epoch run
    int best_epoch = 0;                  // 1-based epoch the returned weights come from
    double best_valid_mse = 0.0;
    double train_rmse = 0.0;             // inference-mode, returned weights, train split
};

/**
 * @brief Seeded minibatch training with early stopping.
 *
 * Shuffles each epoch, keeps the final partial batch, evaluates validation
 * mse after every epoch, and stops once `patience` epochs pass without a
 * strict improvement (or at max_epochs). The returned weights are the
 * snapshot from the best validation epoch, not the last one.
 */
TrainResult train(const NetworkSpec& spec, const weekly::WindowSet& train_set,
                  const weekly::WindowSet& valid_set, const TrainConfig& config);

/// Hyperparameter grid for one family, in a fixed enumeration order so the
/// configuration index is a stable identifier across runs.
std::vector<NetworkSpec> enumerate_grid(Family family);

/// Train and validation windows for one window length.
struct WindowSplit {
    weekly::WindowSet train;
    weekly::WindowSet valid;
};

/// Window length -> supervised splits; the grid looks up each spec's length.
using WindowBank = std::map<int, WindowSplit>;

struct GridConfig {
    TrainConfig train;
    int jobs = 1;
    std::filesystem::path csv_path;      // empty: no streaming, no resume
    int config_limit = 0;                // > 0 truncates the grid, for smoke runs
};

/// One row of the result table: a single training repeat of one
/// configuration, or the whole configuration when its shape is infeasible
/// (repeat = -1) .
struct GridEntry {
    int config_index = 0;
    int repeat = 0;
    NetworkSpec spec;
    bool feasible = true;
    bool failed = false;
    std::size_t param_count = 0;
    int stopped_epoch = 0;
    double train_rmse = 0.0;
    double valid_rmse = 0.0;
};

struct GridSearchResult {
    std::vector<GridEntry> entries;      // sorted by (config_index, repeat)
    NetworkSpec best_spec;
    int best_config_index = -1;
    int best_repeat = -1;
    int best_stopped_epoch = 0;
    double best_train_rmse = 0.0;
    double best_valid_rmse = 0.0;
};

/**
 * @brief Exhaustive seeded grid search for one family.
 *
 * Every (configuration, repeat) pair trains with an independent rng stream
 * derived from the base seed, so results do not depend on scheduling.
 * Rows stream to an append-only csv as they finish; rerunning with the
 * same path skips pairs already on disk. Infeasible family-B shapes are
 * logged and skipped. Selection takes each configuration's best repeat by
 * validation rmse, then the least validation rmse overall, ties broken by
 * fewer parameters then lower configuration index.
 */
GridSearchResult grid_search_nn(Family family, const WindowBank& bank, int repeats,
                                const GridConfig& config);

struct RefitResult {
    NetworkParams params;
    Eigen::VectorXd delta_hat;           // one prediction per test window, in order
};

/// Retrains on train+valid for exactly `stopped_epoch` epochs (no early
/// stopping), then predicts each test window. Windows are built from
/// observed history, so the forecast is one step ahead throughout.
RefitResult refit_and_forecast(const NetworkSpec& spec, int stopped_epoch,
                               const weekly::WindowSet& trainvalid,
                               const weekly::WindowSet& test, const TrainConfig& config);

}
