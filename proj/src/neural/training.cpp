#include "pricecast/neural/training.hpp"

#include "pricecast/io.hpp"
#include "pricecast/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>

namespace pricecast::neural {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void check_windows(const NetworkSpec& spec, const weekly::WindowSet& set, const char* label) {
    if (set.size() == 0) {
        throw std::invalid_argument(std::string("train: ") + label + " split is empty");
    }
    if (set.window != spec.window) {
        throw std::invalid_argument(std::string("train: ") + label +
                                    " window length does not match the architecture");
    }
}

/// One pass over the training windows in minibatches: shuffle, forward,
/// backward, Adam. Returns the sample-weighted mean of the minibatch
/// losses, which is what the per-epoch training history records.
double run_epoch(const NetworkSpec& spec, const weekly::WindowSet& train_set,
                 const TrainConfig& config, std::vector<std::size_t>& order, Rng& rng,
                 NetworkParams& params, NetworkParams& grads, AdamState& state) {
    const std::size_t n = train_set.size();
    rng.shuffle(order);
    std::vector<Eigen::MatrixXd> batch;
    std::vector<DropoutPlan> plans;
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += std::size_t(config.batch_size)) {
        const std::size_t count = std::min(std::size_t(config.batch_size), n - start);
        const Eigen::Index rows = Eigen::Index(count);
        batch.clear();
        plans.clear();
        Eigen::VectorXd targets(rows);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t idx = order[start + i];
            batch.push_back(train_set.inputs[idx]);
            targets(Eigen::Index(i)) = train_set.targets(Eigen::Index(idx));
            plans.push_back(make_dropout_plan(spec, rng));
        }
        grads.set_zero();
        const double mse = loss_and_grads(params, batch, targets, &plans, grads);
        adam_step(params, grads, state, spec.alpha, config);
        epoch_loss += mse * double(count);
    }
    return epoch_loss / double(n);
}

std::string grid_csv_header() {
    return "family,config_index,repeat,l,units,dropout,alpha,filters,kernel,pad1,pad2,"
           "window,feasible,failed,param_count,stopped_epoch,train_rmse,valid_rmse";
}

std::string format_grid_entry(Family family, const GridEntry& e) {
    const NetworkSpec& s = e.spec;
    std::string line;
    line += family_name(family);
    line += ',' + std::to_string(e.config_index);
    line += ',' + std::to_string(e.repeat);
    line += ',' + std::to_string(s.lstm_layers);
    line += ',' + std::to_string(s.units);
    line += ',' + io::format_double(s.dropout);
    line += ',' + io::format_double(s.alpha);
    line += ',' + std::to_string(s.filters);
    line += ',' + std::to_string(s.kernel);
    line += ',' + std::string(padding_name(s.pad1));
    line += ',' + std::string(padding_name(s.pad2));
    line += ',' + std::to_string(s.window);
    line += ',' + std::to_string(int(e.feasible));
    line += ',' + std::to_string(int(e.failed));
    line += ',' + std::to_string(e.param_count);
    line += ',' + std::to_string(e.stopped_epoch);
    line += ',' + io::format_double(e.train_rmse);
    line += ',' + io::format_double(e.valid_rmse);
    return line;
}

/// Reads rows of a previous (possibly interrupted) search. Rows of other
/// families are ignored so A and B could in principle share a file.
std::vector<GridEntry> parse_grid_csv(const std::filesystem::path& path, Family family) {
    std::vector<GridEntry> entries;
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(path.string() + ": cannot read grid csv");
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line_no == 1) {
            continue;
        }
        const std::vector<std::string> f = io::split_line(line, ',');
        if (f.size() != 18) {
            throw std::runtime_error(path.string() + ':' + std::to_string(line_no) +
                                     ": expected 18 columns");
        }
        if (family_from_name(f[0]) != family) {
            continue;
        }
        GridEntry e;
        e.config_index = int(io::parse_int(f[1]));
        e.repeat = int(io::parse_int(f[2]));
        e.spec.family = family;
        e.spec.lstm_layers = int(io::parse_int(f[3]));
        e.spec.units = int(io::parse_int(f[4]));
        e.spec.dropout = io::parse_double(f[5]);
        e.spec.alpha = io::parse_double(f[6]);
        e.spec.filters = int(io::parse_int(f[7]));
        e.spec.kernel = int(io::parse_int(f[8]));
        e.spec.pad1 = padding_from_name(f[9]);
        e.spec.pad2 = padding_from_name(f[10]);
        e.spec.window = int(io::parse_int(f[11]));
        e.feasible = io::parse_int(f[12]) != 0;
        e.failed = io::parse_int(f[13]) != 0;
        e.param_count = std::size_t(io::parse_int(f[14]));
        e.stopped_epoch = int(io::parse_int(f[15]));
        e.train_rmse = io::parse_double(f[16]);
        e.valid_rmse = io::parse_double(f[17]);
        entries.push_back(std::move(e));
    }
    return entries;
}

}

void validate_train_config(const TrainConfig& config) {
    if (config.batch_size < 1 || config.max_epochs < 1 || config.patience < 0) {
        throw std::invalid_argument("TrainConfig: sizes must be positive");
    }
    if (config.patience >= config.max_epochs) {
        throw std::invalid_argument("TrainConfig: patience must be below max_epochs");
    }
    if (config.beta1 < 0.0 || config.beta1 >= 1.0 || config.beta2 < 0.0 ||
        config.beta2 >= 1.0 || config.eps_adam <= 0.0) {
        throw std::invalid_argument("TrainConfig: invalid Adam constants");
    }
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state,
               double alpha, const TrainConfig& config) {
    const Eigen::VectorXd& g = grads.flat();
    if (state.m.size() != g.size() || params.flat().size() != g.size()) {
        throw std::invalid_argument("adam_step: parameter, gradient, and state sizes differ");
    }
    state.step += 1;
    state.m = config.beta1 * state.m + (1.0 - config.beta1) * g;
    state.v = config.beta2 * state.v + (1.0 - config.beta2) * g.cwiseProduct(g);
    const double m_scale = 1.0 - std::pow(config.beta1, double(state.step));
    const double v_scale = 1.0 - std::pow(config.beta2, double(state.step));
    params.flat().array() -=
        alpha * (state.m.array() / m_scale) /
        ((state.v.array() / v_scale).sqrt() + config.eps_adam);
}

TrainResult train(const NetworkSpec& spec, const weekly::WindowSet& train_set,
                  const weekly::WindowSet& valid_set, const TrainConfig& config) {
    validate_spec(spec);
    validate_train_config(config);
    check_windows(spec, train_set, "training");
    check_windows(spec, valid_set, "validation");

    Rng rng(config.seed);
    NetworkParams params = NetworkParams::init(spec, rng);
    NetworkParams grads(spec);
    AdamState state(params.flat().size());

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t(0));

    TrainResult result;
    NetworkParams best = params;
    double best_valid = std::numeric_limits<double>::infinity();
    int wait = 0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const double train_mse =
            run_epoch(spec, train_set, config, order, rng, params, grads, state);
        const double valid_mse = evaluate_mse(params, valid_set.inputs, valid_set.targets);
        result.train_history.push_back(train_mse);
        result.valid_history.push_back(valid_mse);
        result.stopped_epoch = epoch;
        if (valid_mse < best_valid) {
            best_valid = valid_mse;
            best = params;
            result.best_epoch = epoch;
            wait = 0;
        } else {
            ++wait;
            if (wait >= config.patience) {
                break;
            }
        }
    }
    result.params = std::move(best);
    result.best_valid_mse = best_valid;
    result.train_rmse =
        std::sqrt(evaluate_mse(result.params, train_set.inputs, train_set.targets));
    return result;
}

std::vector<NetworkSpec> enumerate_grid(Family family) {
    static const int layer_counts[] = {1, 2, 3};
    static const int unit_counts[] = {32, 64, 96};
    static const double dropout_rates[] = {0.1, 0.2, 0.3};
    static const double learning_rates[] = {0.0005, 0.001};
    static const int filter_counts[] = {10, 20, 30};
    static const int kernel_sizes[] = {2, 4};
    static const Padding paddings[] = {Padding::None, Padding::Same, Padding::Causal};
    static const int window_lengths[] = {4, 8, 12};

    std::vector<NetworkSpec> grid;
    for (int l : layer_counts) {
        for (int units : unit_counts) {
            for (double r : dropout_rates) {
                for (double alpha : learning_rates) {
                    NetworkSpec spec;
                    spec.family = family;
                    spec.lstm_layers = l;
                    spec.units = units;
                    spec.dropout = r;
                    spec.alpha = alpha;
                    if (family == Family::A) {
                        spec.window = 4;
                        grid.push_back(spec);
                        continue;
                    }
                    for (int f : filter_counts) {
                        for (int k : kernel_sizes) {
                            for (Padding pad1 : paddings) {
                                for (Padding pad2 : paddings) {
                                    for (int n : window_lengths) {
                                        spec.filters = f;
                                        spec.kernel = k;
                                        spec.pad1 = pad1;
                                        spec.pad2 = pad2;
                                        spec.window = n;
                                        grid.push_back(spec);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return grid;
}

GridSearchResult grid_search_nn(Family family, const WindowBank& bank, int repeats,
                                const GridConfig& config) {
    if (repeats < 1) {
        throw std::invalid_argument("grid_search_nn: repeats must be at least 1");
    }
    validate_train_config(config.train);

    std::vector<NetworkSpec> specs = enumerate_grid(family);
    if (config.config_limit > 0 && std::size_t(config.config_limit) < specs.size()) {
        specs.resize(std::size_t(config.config_limit));
    }
    for (const NetworkSpec& spec : specs) {
        if (shape_feasible(spec) && bank.find(spec.window) == bank.end()) {
            throw std::invalid_argument("grid_search_nn: no windows prepared for length " +
                                        std::to_string(spec.window));
        }
    }

    GridSearchResult result;
    std::set<std::pair<int, int>> done;
    const bool streaming = !config.csv_path.empty();
    std::ofstream out;
    if (streaming) {
        const bool resuming = std::filesystem::exists(config.csv_path) &&
                              std::filesystem::file_size(config.csv_path) > 0;
        if (resuming) {
            for (GridEntry& e : parse_grid_csv(config.csv_path, family)) {
                if (std::size_t(e.config_index) < specs.size()) {
                    done.insert({e.config_index, e.repeat});
                    result.entries.push_back(std::move(e));
                }
            }
        }
        out.open(config.csv_path, std::ios::app);
        if (!out) {
            throw std::runtime_error(config.csv_path.string() + ": cannot open grid csv");
        }
        if (!resuming) {
            out << grid_csv_header() << '\n' << std::flush;
        }
    }

    std::vector<std::pair<int, int>> work;
    for (std::size_t ci = 0; ci < specs.size(); ++ci) {
        const int index = int(ci);
        if (!shape_feasible(specs[ci])) {
            if (done.find({index, -1}) == done.end()) {
                work.emplace_back(index, -1);
            }
            continue;
        }
        for (int rep = 0; rep < repeats; ++rep) {
            if (done.find({index, rep}) == done.end()) {
                work.emplace_back(index, rep);
            }
        }
    }

    std::mutex record_mutex;
    parallel_for(work.size(), config.jobs, [&](std::size_t wi) {
        const auto [ci, rep] = work[wi];
        GridEntry entry;
        entry.config_index = ci;
        entry.repeat = rep;
        entry.spec = specs[std::size_t(ci)];
        if (rep < 0) {
            entry.feasible = false;
            entry.train_rmse = kNan;
            entry.valid_rmse = kNan;
        } else {
            entry.param_count = std::size_t(make_layout(entry.spec).total);
            TrainConfig tc = config.train;
            tc.seed = Rng::mix(config.train.seed,
                               std::uint64_t(ci) * 1024 + std::uint64_t(rep));
            const WindowSplit& split = bank.at(entry.spec.window);
            try {
                TrainResult run = train(entry.spec, split.train, split.valid, tc);
                entry.stopped_epoch = run.stopped_epoch;
                entry.train_rmse = run.train_rmse;
                entry.valid_rmse = std::sqrt(run.best_valid_mse);
            } catch (const std::runtime_error&) {
                // a diverged training run is a data point, not a failed search
                entry.failed = true;
                entry.train_rmse = kNan;
                entry.valid_rmse = kNan;
            }
        }
        const std::lock_guard<std::mutex> lock(record_mutex);
        if (streaming) {
            out << format_grid_entry(family, entry) << '\n' << std::flush;
        }
        result.entries.push_back(std::move(entry));
    });

    std::sort(result.entries.begin(), result.entries.end(),
              [](const GridEntry& a, const GridEntry& b) {
                  return a.config_index != b.config_index ? a.config_index < b.config_index
                                                          : a.repeat < b.repeat;
              });

    // Best repeat per configuration (first one wins ties because entries
    // are sorted), then the configuration with the least validation rmse,
    // ties to fewer parameters, then to the lower index.
    std::map<int, const GridEntry*> best_per_config;
    for (const GridEntry& e : result.entries) {
        if (!e.feasible || e.failed || !std::isfinite(e.valid_rmse)) {
            continue;
        }
        auto [it, inserted] = best_per_config.try_emplace(e.config_index, &e);
        if (!inserted && e.valid_rmse < it->second->valid_rmse) {
            it->second = &e;
        }
    }
    const GridEntry* best = nullptr;
    for (const auto& [index, entry] : best_per_config) {
        if (best == nullptr || entry->valid_rmse < best->valid_rmse ||
            (entry->valid_rmse == best->valid_rmse &&
             entry->param_count < best->param_count)) {
            best = entry;
        }
    }
    if (best == nullptr) {
        throw std::runtime_error("grid_search_nn: every configuration failed");
    }
    result.best_spec = best->spec;
    result.best_config_index = best->config_index;
    result.best_repeat = best->repeat;
    result.best_stopped_epoch = best->stopped_epoch;
    result.best_train_rmse = best->train_rmse;
    result.best_valid_rmse = best->valid_rmse;
    return result;
}

RefitResult refit_and_forecast(const NetworkSpec& spec, int stopped_epoch,
                               const weekly::WindowSet& trainvalid,
                               const weekly::WindowSet& test, const TrainConfig& config) {
    if (stopped_epoch < 1) {
        throw std::invalid_argument("refit_and_forecast: stopped_epoch must be at least 1");
    }
    validate_spec(spec);
    validate_train_config(config);
    check_windows(spec, trainvalid, "refit");
    if (test.size() > 0 && test.window != spec.window) {
        throw std::invalid_argument("refit_and_forecast: test window length mismatch");
    }

    Rng rng(config.seed);
    NetworkParams params = NetworkParams::init(spec, rng);
    NetworkParams grads(spec);
    AdamState state(params.flat().size());
    std::vector<std::size_t> order(trainvalid.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    for (int epoch = 1; epoch <= stopped_epoch; ++epoch) {
        run_epoch(spec, trainvalid, config, order, rng, params, grads, state);
    }

    RefitResult result;
    result.delta_hat.resize(Eigen::Index(test.size()));
    for (std::size_t i = 0; i < test.size(); ++i) {
        result.delta_hat(Eigen::Index(i)) = forward_one(params, test.inputs[i], nullptr);
    }
    result.params = std::move(params);
    return result;
}

}
