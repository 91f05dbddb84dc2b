#include "pricecast/neural/training.hpp"

#include "pricecast/io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <vector>

using namespace pricecast;
using neural::Family;
using neural::NetworkParams;
using neural::NetworkSpec;
using neural::Padding;
using neural::TrainConfig;

namespace {

NetworkSpec tiny_spec(double dropout = 0.1) {
    NetworkSpec spec;
    spec.family = Family::A;
    spec.lstm_layers = 1;
    spec.units = 4;
    spec.dropout = dropout;
    spec.window = 4;
    spec.inputs = 9;
    return spec;
}

weekly::WindowSet fake_windows(int count, int window, std::uint64_t seed,
                               double input_scale = 0.5, double target_scale = 0.1) {
    weekly::WindowSet set;
    set.window = window;
    Rng rng(seed);
    set.targets.resize(count);
    for (int i = 0; i < count; ++i) {
        Eigen::MatrixXd x(window, 9);
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                x(r, c) = rng.normal(0.0, input_scale);
            }
        }
        set.inputs.push_back(std::move(x));
        set.targets(i) = rng.normal(0.0, target_scale);
        set.target_rows.push_back(std::size_t(i));
    }
    return set;
}

TrainConfig quick_config(std::uint64_t seed, int max_epochs = 4, int patience = 2) {
    TrainConfig config;
    config.max_epochs = max_epochs;
    config.patience = patience;
    config.seed = seed;
    return config;
}

}

TEST_CASE("train config validation") {
    CHECK_NOTHROW(neural::validate_train_config(TrainConfig{}));

    TrainConfig impatient;
    impatient.patience = impatient.max_epochs;
    CHECK_THROWS_AS(neural::validate_train_config(impatient), std::invalid_argument);

    TrainConfig no_batch;
    no_batch.batch_size = 0;
    CHECK_THROWS_AS(neural::validate_train_config(no_batch), std::invalid_argument);

    TrainConfig bad_beta;
    bad_beta.beta2 = 1.0;
    CHECK_THROWS_AS(neural::validate_train_config(bad_beta), std::invalid_argument);

    TrainConfig bad_eps;
    bad_eps.eps_adam = 0.0;
    CHECK_THROWS_AS(neural::validate_train_config(bad_eps), std::invalid_argument);
}

TEST_CASE("adam takes a signed step of at most alpha") {
    const NetworkSpec spec = tiny_spec(0.0);
    NetworkParams params(spec);
    NetworkParams grads(spec);
    neural::AdamState state(params.flat().size());
    const TrainConfig config;

    // First bias-corrected step is -alpha * g / (|g| + eps).
    grads.flat().setConstant(2.0);
    grads.flat()(0) = -1.0;
    neural::adam_step(params, grads, state, 0.01, config);
    CHECK(params.flat()(0) == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(params.flat()(1) == doctest::Approx(-0.01).epsilon(1e-6));

    // A gradient equal to eps moves half a step, which pins the epsilon
    // outside the square root: inside it the step would be 1e4 smaller.
    NetworkParams fresh(spec);
    neural::AdamState fresh_state(fresh.flat().size());
    grads.flat().setConstant(1e-8);
    neural::adam_step(fresh, grads, fresh_state, 0.01, config);
    CHECK(fresh.flat()(5) == doctest::Approx(-0.005).epsilon(1e-6));

    // Zero gradient leaves the parameters alone.
    NetworkParams still(spec);
    neural::AdamState still_state(still.flat().size());
    grads.set_zero();
    neural::adam_step(still, grads, still_state, 0.01, config);
    CHECK(still.flat().cwiseAbs().maxCoeff() == 0.0);

    neural::AdamState wrong(3);
    CHECK_THROWS_AS(neural::adam_step(params, grads, wrong, 0.01, config),
                    std::invalid_argument);
}

TEST_CASE("adam minimises a quadratic bowl") {
    // The network container is just a flat vector here; the objective is
    // 0.5 * ||x||^2 with gradient x.
    const NetworkSpec spec = tiny_spec(0.0);
    NetworkParams x(spec);
    x.flat().setOnes();
    NetworkParams grads(spec);
    neural::AdamState state(x.flat().size());
    const TrainConfig config;
    for (int step = 0; step < 500; ++step) {
        grads.flat() = x.flat();
        neural::adam_step(x, grads, state, 0.01, config);
    }
    CHECK(x.flat().cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("training rejects bad splits") {
    const NetworkSpec spec = tiny_spec();
    const auto train_set = fake_windows(8, 4, 1);
    const auto valid_set = fake_windows(3, 4, 2);

    weekly::WindowSet empty;
    empty.window = 4;
    CHECK_THROWS_AS(neural::train(spec, empty, valid_set, quick_config(0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(neural::train(spec, train_set, empty, quick_config(0)),
                    std::invalid_argument);

    const auto wrong_window = fake_windows(8, 5, 3);
    CHECK_THROWS_AS(neural::train(spec, wrong_window, valid_set, quick_config(0)),
                    std::invalid_argument);
}

TEST_CASE("a poisoned target surfaces as a training error") {
    const NetworkSpec spec = tiny_spec();
    auto train_set = fake_windows(8, 4, 1);
    train_set.targets(2) = std::numeric_limits<double>::quiet_NaN();
    const auto valid_set = fake_windows(3, 4, 2);
    CHECK_THROWS_AS(neural::train(spec, train_set, valid_set, quick_config(0)),
                    std::runtime_error);
}

TEST_CASE("an exactly flat validation loss stops after patience extra epochs") {
    // Zero inputs keep every cell candidate at tanh(0), so the hidden
    // states, the predictions, the loss, and all gradients are exactly
    // zero: the validation mse can never improve after epoch one.
    const NetworkSpec spec = tiny_spec(0.2);
    auto train_set = fake_windows(6, 4, 1, 0.0, 0.0);
    auto valid_set = fake_windows(3, 4, 2, 0.0, 0.0);

    TrainConfig config = quick_config(11, 150, 5);
    const neural::TrainResult result = neural::train(spec, train_set, valid_set, config);
    CHECK(result.stopped_epoch == 6);
    CHECK(result.best_epoch == 1);
    CHECK(result.best_valid_mse == 0.0);
    CHECK(int(result.train_history.size()) == result.stopped_epoch);
    CHECK(int(result.valid_history.size()) == result.stopped_epoch);
    CHECK(*std::max_element(result.valid_history.begin(), result.valid_history.end()) == 0.0);
}

TEST_CASE("training is reproducible and returns the best epoch weights") {
    const NetworkSpec spec = tiny_spec(0.1);
    const auto train_set = fake_windows(20, 4, 5);
    const auto valid_set = fake_windows(6, 4, 6);
    const TrainConfig config = quick_config(21, 8, 7);

    const neural::TrainResult first = neural::train(spec, train_set, valid_set, config);
    const neural::TrainResult second = neural::train(spec, train_set, valid_set, config);

    REQUIRE(first.train_history.size() == second.train_history.size());
    for (std::size_t i = 0; i < first.train_history.size(); ++i) {
        CHECK(first.train_history[i] == second.train_history[i]);
        CHECK(first.valid_history[i] == second.valid_history[i]);
    }
    CHECK((first.params.flat() - second.params.flat()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(first.stopped_epoch == second.stopped_epoch);

    // The returned weights really are the snapshot from the best epoch.
    const double replayed =
        neural::evaluate_mse(first.params, valid_set.inputs, valid_set.targets);
    CHECK(replayed == first.best_valid_mse);
    CHECK(first.best_valid_mse ==
          *std::min_element(first.valid_history.begin(), first.valid_history.end()));
    CHECK(first.best_epoch >= 1);
    CHECK(first.best_epoch <= first.stopped_epoch);
    CHECK(first.train_rmse >= 0.0);
}

TEST_CASE("hyperparameter grids enumerate in a fixed order") {
    const auto grid_a = neural::enumerate_grid(Family::A);
    REQUIRE(grid_a.size() == 54);
    for (const NetworkSpec& spec : grid_a) {
        CHECK(spec.window == 4);
        CHECK(spec.family == Family::A);
    }
    // The learning rate is the fastest axis, then dropout, units, layers.
    CHECK(grid_a[0].lstm_layers == 1);
    CHECK(grid_a[0].units == 32);
    CHECK(grid_a[0].dropout == 0.1);
    CHECK(grid_a[0].alpha == 0.0005);
    CHECK(grid_a[1].alpha == 0.001);
    CHECK(grid_a[2].dropout == 0.2);
    CHECK(grid_a[2].alpha == 0.0005);
    CHECK(grid_a[6].units == 64);
    CHECK(grid_a[18].lstm_layers == 2);
    CHECK(grid_a[53].lstm_layers == 3);
    CHECK(grid_a[53].units == 96);
    CHECK(grid_a[53].dropout == 0.3);
    CHECK(grid_a[53].alpha == 0.001);

    const auto grid_b = neural::enumerate_grid(Family::B);
    REQUIRE(grid_b.size() == 8748);
    int feasible = 0;
    for (const NetworkSpec& spec : grid_b) {
        CHECK(spec.family == Family::B);
        const bool window_known =
            spec.window == 4 || spec.window == 8 || spec.window == 12;
        CHECK(window_known);
        if (neural::shape_feasible(spec)) {
            ++feasible;
        }
    }
    // The unpadded shapes that collapse below one timestep are kept in
    // the enumeration and filtered later.
    CHECK(feasible > 0);
    CHECK(feasible < 8748);
    CHECK(grid_b[0].filters == 10);
    CHECK(grid_b[0].kernel == 2);
    CHECK(grid_b[0].pad1 == Padding::None);
    CHECK(grid_b[0].pad2 == Padding::None);
    CHECK(grid_b[0].window == 4);
    CHECK(grid_b[1].window == 8);
    CHECK(grid_b[3].pad2 == Padding::Same);
    CHECK(grid_b[3].window == 4);
}

TEST_CASE("grid search streams rows, resumes, and is schedule independent") {
    const auto dir = testsupport::scratch_dir("nn_grid");
    neural::WindowBank bank;
    bank[4] = {fake_windows(12, 4, 31), fake_windows(4, 4, 32)};

    neural::GridConfig config;
    config.train = quick_config(77, 3, 2);
    config.config_limit = 2;
    config.csv_path = dir / "grid_a.csv";

    const auto result = neural::grid_search_nn(Family::A, bank, 2, config);
    REQUIRE(result.entries.size() == 4);
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        const auto& e = result.entries[i];
        CHECK(e.config_index == int(i / 2));
        CHECK(e.repeat == int(i % 2));
        CHECK(e.feasible);
        CHECK_FALSE(e.failed);
        CHECK(e.param_count > 0);
        CHECK(std::isfinite(e.valid_rmse));
    }
    CHECK(result.best_config_index >= 0);
    CHECK(result.best_valid_rmse > 0.0);
    double least = std::numeric_limits<double>::infinity();
    for (const auto& e : result.entries) {
        least = std::min(least, e.valid_rmse);
    }
    CHECK(result.best_valid_rmse == least);

    // The csv mirror carries one header and one line per run.
    std::ifstream in(config.csv_path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        lines.push_back(line);
    }
    in.close();
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] ==
          "family,config_index,repeat,l,units,dropout,alpha,filters,kernel,pad1,pad2,"
          "window,feasible,failed,param_count,stopped_epoch,train_rmse,valid_rmse");
    CHECK(io::split_line(lines[1], ',').size() == 18);

    // Rerunning resumes from the file and trains nothing new.
    const std::string before = io::read_file(config.csv_path);
    const auto resumed = neural::grid_search_nn(Family::A, bank, 2, config);
    CHECK(io::read_file(config.csv_path) == before);
    REQUIRE(resumed.entries.size() == 4);
    CHECK(resumed.best_config_index == result.best_config_index);
    CHECK(resumed.best_repeat == result.best_repeat);
    CHECK(resumed.best_valid_rmse == result.best_valid_rmse);

    // A wider limit on the same file only runs the configurations that
    // are not on disk yet.
    neural::GridConfig wider = config;
    wider.config_limit = 3;
    const auto extended = neural::grid_search_nn(Family::A, bank, 2, wider);
    CHECK(extended.entries.size() == 6);
    std::ifstream again(wider.csv_path);
    std::size_t line_count = 0;
    for (std::string line; std::getline(again, line);) {
        ++line_count;
    }
    CHECK(line_count == 7);

    // Worker count cannot change the results, only the wall time.
    neural::GridConfig parallel = config;
    parallel.csv_path.clear();
    parallel.jobs = 2;
    const auto threaded = neural::grid_search_nn(Family::A, bank, 2, parallel);
    REQUIRE(threaded.entries.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(threaded.entries[i].valid_rmse == result.entries[i].valid_rmse);
        CHECK(threaded.entries[i].train_rmse == result.entries[i].train_rmse);
    }

    CHECK_THROWS_AS(neural::grid_search_nn(Family::A, bank, 0, config),
                    std::invalid_argument);
    neural::WindowBank missing;
    CHECK_THROWS_AS(neural::grid_search_nn(Family::A, missing, 1, parallel),
                    std::invalid_argument);
}

TEST_CASE("family B grid search logs infeasible shapes instead of training them") {
    const auto dir = testsupport::scratch_dir("nn_grid_b");
    neural::WindowBank bank;
    bank[4] = {fake_windows(10, 4, 41), fake_windows(4, 4, 42)};
    bank[8] = {fake_windows(10, 8, 43), fake_windows(4, 8, 44)};
    bank[12] = {fake_windows(10, 12, 45), fake_windows(4, 12, 46)};

    neural::GridConfig config;
    config.train = quick_config(55, 2, 1);
    // The first three B configurations are kernel 2 with no padding on
    // either conv, over windows 4, 8, 12; window 4 collapses to zero
    // timesteps before the lstm.
    config.config_limit = 3;
    config.csv_path = dir / "grid_b.csv";

    const auto result = neural::grid_search_nn(Family::B, bank, 1, config);
    REQUIRE(result.entries.size() == 3);
    CHECK(result.entries[0].repeat == -1);
    CHECK_FALSE(result.entries[0].feasible);
    CHECK(std::isnan(result.entries[0].valid_rmse));
    CHECK(result.entries[1].feasible);
    CHECK(result.entries[2].feasible);
    CHECK(result.best_config_index >= 1);

    // The infeasible row still lands in the csv, marked as such.
    std::ifstream in(config.csv_path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        lines.push_back(line);
    }
    REQUIRE(lines.size() == 4);
    const auto fields = io::split_line(lines[1], ',');
    REQUIRE(fields.size() == 18);
    CHECK(fields[0] == "B");
    CHECK(fields[2] == "-1");
    CHECK(fields[12] == "0");
    CHECK(fields[17] == "nan");
}

TEST_CASE("refit trains for a fixed epoch count and forecasts the test windows") {
    const NetworkSpec spec = tiny_spec(0.1);
    const auto trainvalid = fake_windows(16, 4, 61);
    const auto test = fake_windows(5, 4, 62);
    const TrainConfig config = quick_config(63);

    CHECK_THROWS_AS(neural::refit_and_forecast(spec, 0, trainvalid, test, config),
                    std::invalid_argument);

    const auto result = neural::refit_and_forecast(spec, 3, trainvalid, test, config);
    REQUIRE(result.delta_hat.size() == 5);
    const auto again = neural::refit_and_forecast(spec, 3, trainvalid, test, config);
    CHECK((result.delta_hat - again.delta_hat).cwiseAbs().maxCoeff() == 0.0);

    // Predictions match running the refit weights by hand.
    for (std::size_t i = 0; i < test.size(); ++i) {
        CHECK(result.delta_hat(Eigen::Index(i)) ==
              neural::forward_one(result.params, test.inputs[i], nullptr));
    }

    weekly::WindowSet no_test;
    no_test.window = 4;
    const auto empty_ok = neural::refit_and_forecast(spec, 2, trainvalid, no_test, config);
    CHECK(empty_ok.delta_hat.size() == 0);

    const auto wrong = fake_windows(3, 6, 64);
    CHECK_THROWS_AS(neural::refit_and_forecast(spec, 2, trainvalid, wrong, config),
                    std::invalid_argument);
}
