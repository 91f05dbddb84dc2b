#include "pricecast/harness.hpp"

#include "pricecast/io.hpp"
#include "pricecast/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pricecast::harness {

namespace {

using nlohmann::json;

/// Stationarity check on the AR side: all companion-matrix eigenvalues
/// strictly inside the unit circle.
bool ar_stationary(const std::vector<double>& phi) {
    std::size_t p = phi.size();
    while (p > 0 && phi[p - 1] == 0.0) {
        --p;
    }
    if (p == 0) {
        return true;
    }
    const Eigen::Index order = Eigen::Index(p);
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(order, order);
    for (Eigen::Index i = 0; i < order; ++i) {
        companion(0, i) = phi[std::size_t(i)];
    }
    if (order > 1) {
        companion.block(1, 0, order - 1, order - 1).setIdentity();
    }
    const Eigen::VectorXcd roots = companion.eigenvalues();
    for (Eigen::Index i = 0; i < roots.size(); ++i) {
        if (std::abs(roots(i)) >= 1.0) {
            return false;
        }
    }
    return true;
}

template <typename F>
auto run_stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(name) + ": " + e.what());
    }
}

json metrics_to_json(const metrics::MetricsReport& m) {
    return {{"rmse", m.rmse}, {"mae", m.mae}, {"mape", m.mape}, {"weeks", m.weeks}};
}

std::string scaler_name(weekly::ScalerKind kind) {
    return kind == weekly::ScalerKind::MinMax ? "minmax" : "zscore";
}

weekly::ScalerKind scaler_from_name(const std::string& name) {
    if (name == "minmax") {
        return weekly::ScalerKind::MinMax;
    }
    if (name == "zscore") {
        return weekly::ScalerKind::ZScore;
    }
    throw std::invalid_argument("unknown scaler '" + name + "'");
}

/// Two supervised window sets glued back to back, used to rebuild the
/// train+valid set a final refit trains on.
weekly::WindowSet concat_windows(const weekly::WindowSet& a, const weekly::WindowSet& b) {
    weekly::WindowSet out;
    out.window = a.window;
    out.inputs = a.inputs;
    out.inputs.insert(out.inputs.end(), b.inputs.begin(), b.inputs.end());
    out.targets.resize(a.targets.size() + b.targets.size());
    out.targets << a.targets, b.targets;
    out.target_rows = a.target_rows;
    out.target_rows.insert(out.target_rows.end(), b.target_rows.begin(), b.target_rows.end());
    return out;
}

}

std::vector<double> simulate_arima(const arima::ArimaSpec& spec, const std::vector<double>& phi,
                                   const std::vector<double>& theta, double sigma,
                                   std::size_t n, std::uint64_t seed, double base_price) {
    if (n == 0) {
        throw std::invalid_argument("simulate_arima: n must be positive");
    }
    if (sigma < 0.0 || base_price <= 0.0) {
        throw std::invalid_argument("simulate_arima: sigma must be >= 0 and base price > 0");
    }
    if (spec.d != 0 && spec.d != 1) {
        throw std::invalid_argument("simulate_arima: d must be 0 or 1");
    }
    if (!ar_stationary(phi)) {
        throw std::invalid_argument("simulate_arima: AR polynomial is not stationary");
    }

    Rng rng(seed);
    const std::size_t burn = 200;
    const std::size_t total = n + burn;
    std::vector<double> w(total, 0.0);
    std::vector<double> e(total, 0.0);
    for (std::size_t t = 0; t < total; ++t) {
        e[t] = sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0;
        double value = e[t];
        for (std::size_t i = 0; i < phi.size(); ++i) {
            if (t > i) {
                value += phi[i] * w[t - 1 - i];
            }
        }
        for (std::size_t j = 0; j < theta.size(); ++j) {
            if (t > j) {
                value += theta[j] * e[t - 1 - j];
            }
        }
        w[t] = value;
    }

    std::vector<double> price(n);
    double log_price = std::log(base_price);
    for (std::size_t k = 0; k < n; ++k) {
        if (spec.d == 1) {
            log_price += w[burn + k];
            price[k] = std::exp(log_price);
        } else {
            price[k] = std::exp(std::log(base_price) + w[burn + k]);
        }
    }
    return price;
}

additive::DatedSeries simulate_trend_season(const TrendSeasonConfig& config) {
    if (config.weeks < 10) {
        throw std::invalid_argument("simulate_trend_season: need at least 10 weeks");
    }
    if (config.noise_sigma < 0.0) {
        throw std::invalid_argument("simulate_trend_season: negative noise scale");
    }
    Rng rng(config.seed);
    additive::DatedSeries out;
    out.reserve(config.weeks);
    for (std::size_t i = 0; i < config.weeks; ++i) {
        const Date d = config.start + std::chrono::days(7 * long(i));
        const double u = 7.0 * double(i);
        double y = config.intercept + config.slope * u;
        if (u > config.changepoint_day) {
            y += config.slope_change * (u - config.changepoint_day);
        }
        y += config.amplitude * std::sin(2.0 * std::numbers::pi * u / 365.25);
        if (config.noise_sigma > 0.0) {
            y += rng.normal(0.0, config.noise_sigma);
        }
        out.emplace_back(d, y);
    }
    return out;
}

std::vector<ingest::OrderRecord> simulate_orders(const SyntheticOrdersConfig& config) {
    if (config.weeks == 0 || config.orders_per_week < 1) {
        throw std::invalid_argument("simulate_orders: need at least one week and one order");
    }
    if (config.base_price <= 0.0 || config.weekly_sigma < 0.0 || config.order_sigma < 0.0 ||
        config.outlier_rate < 0.0 || config.outlier_rate >= 1.0) {
        throw std::invalid_argument("simulate_orders: invalid price parameters");
    }

    Rng rng(config.seed);
    std::vector<ingest::OrderRecord> out;
    out.reserve(config.weeks * std::size_t(config.orders_per_week));
    double week_price = config.base_price;
    long long order_counter = 100000;
    for (std::size_t w = 0; w < config.weeks; ++w) {
        const Date monday = config.start + std::chrono::days(7 * long(w));
        week_price *= std::exp(rng.normal(0.0, config.weekly_sigma));
        for (int o = 0; o < config.orders_per_week; ++o) {
            ingest::OrderRecord r;
            r.date = monday + std::chrono::days(long(rng.below(5)));
            r.order_number = "SO" + std::to_string(++order_counter);
            double p = week_price * std::exp(rng.normal(0.0, config.order_sigma));
            if (config.outlier_rate > 0.0 && rng.uniform() < config.outlier_rate) {
                p *= 10.0;     // a misplaced decimal point, the classic entry error
            }
            r.unit_price = p;
            r.article_code = config.article;
            r.quantity = 1 + (long long)(rng.below(20));
            r.customer_code = "C" + std::to_string(1 + rng.below(12));
            r.on_offer = rng.uniform() < 0.1;
            if (r.on_offer) {
                r.offer_type = "PROMO";
            }
            r.unit_cost = 0.75 * p;
            out.push_back(std::move(r));
        }
    }
    return out;
}

void write_orders_csv(const std::vector<ingest::OrderRecord>& records,
                      const std::filesystem::path& path) {
    std::string text =
        "date,order_number,unit_price,article_code,quantity,customer_code,on_offer,"
        "offer_type,unit_cost\n";
    for (const ingest::OrderRecord& r : records) {
        text += format_date(r.date);
        text += ',' + r.order_number;
        text += ',' + io::format_double(r.unit_price);
        text += ',' + r.article_code;
        text += ',' + std::to_string(r.quantity);
        text += ',' + r.customer_code;
        text += r.on_offer ? ",1," : ",0,";
        text += r.offer_type.value_or("");
        text += ',' + io::format_double(r.unit_cost);
        text += '\n';
    }
    io::write_atomic(path, text);
}

PipelineConfig pipeline_config_from_json(const json& j) {
    PipelineConfig c;
    c.orders_csv = j.value("input", std::string());
    c.article = j.value("article", std::string());
    if (j.contains("cutoff")) {
        c.cutoff = parse_date(j.at("cutoff").get<std::string>());
    }
    c.zscore_threshold = j.value("zscore_threshold", c.zscore_threshold);
    c.gap_max = j.value("gap_max", c.gap_max);
    if (j.contains("train_end")) {
        c.train_end = parse_date(j.at("train_end").get<std::string>());
    }
    if (j.contains("valid_end")) {
        c.valid_end = parse_date(j.at("valid_end").get<std::string>());
    }
    c.scaler = scaler_from_name(j.value("scaler", scaler_name(c.scaler)));

    if (j.contains("arima")) {
        const json& a = j.at("arima");
        c.arima_pmax = a.value("pmax", c.arima_pmax);
        c.arima_qmax = a.value("qmax", c.arima_qmax);
        c.arima_d = a.value("d", c.arima_d);
        c.arima_refit = a.value("refit", c.arima_refit);
    }
    if (j.contains("additive")) {
        const json& a = j.at("additive");
        c.additive.tau = a.value("tau", c.additive.tau);
        c.additive.sigma_season = a.value("sigma", c.additive.sigma_season);
        c.additive.changepoints = a.value("changepoints", c.additive.changepoints);
        c.additive.changepoint_fraction = a.value("fraction", c.additive.changepoint_fraction);
        c.additive.fourier_order = a.value("harmonics", c.additive.fourier_order);
        c.additive.period_days = a.value("period", c.additive.period_days);
        if (a.contains("tau_grid")) {
            c.tau_grid = a.at("tau_grid").get<std::vector<double>>();
        }
        if (a.contains("sigma_grid")) {
            c.sigma_grid = a.at("sigma_grid").get<std::vector<double>>();
        }
    }
    if (j.contains("nn")) {
        const json& a = j.at("nn");
        c.nn_repeats_a = a.value("repeats_a", c.nn_repeats_a);
        c.nn_repeats_b = a.value("repeats_b", c.nn_repeats_b);
        c.train.batch_size = a.value("batch_size", c.train.batch_size);
        c.train.max_epochs = a.value("max_epochs", c.train.max_epochs);
        c.train.patience = a.value("patience", c.train.patience);
        c.nn_config_limit = a.value("config_limit", c.nn_config_limit);
    }
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    return c;
}

json pipeline_config_to_json(const PipelineConfig& c) {
    json j;
    j["input"] = c.orders_csv.string();
    j["article"] = c.article;
    j["cutoff"] = format_date(c.cutoff);
    j["zscore_threshold"] = c.zscore_threshold;
    j["gap_max"] = c.gap_max;
    j["train_end"] = format_date(c.train_end);
    j["valid_end"] = format_date(c.valid_end);
    j["scaler"] = scaler_name(c.scaler);
    j["arima"] = {{"pmax", c.arima_pmax},
                  {"qmax", c.arima_qmax},
                  {"d", c.arima_d},
                  {"refit", c.arima_refit}};
    j["additive"] = {{"tau", c.additive.tau},
                     {"sigma", c.additive.sigma_season},
                     {"changepoints", c.additive.changepoints},
                     {"fraction", c.additive.changepoint_fraction},
                     {"harmonics", c.additive.fourier_order},
                     {"period", c.additive.period_days},
                     {"tau_grid", c.tau_grid},
                     {"sigma_grid", c.sigma_grid}};
    j["nn"] = {{"repeats_a", c.nn_repeats_a},
               {"repeats_b", c.nn_repeats_b},
               {"batch_size", c.train.batch_size},
               {"max_epochs", c.train.max_epochs},
               {"patience", c.train.patience},
               {"config_limit", c.nn_config_limit}};
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    return j;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    return pipeline_config_from_json(json::parse(io::read_file(path)));
}

PipelineResult run_pipeline(const PipelineConfig& config,
                            const std::filesystem::path& out_dir) {
    if (config.orders_csv.empty() || config.article.empty()) {
        throw std::invalid_argument("run_pipeline: input csv and article are required");
    }
    if (config.train_end == Date{} || config.valid_end == Date{} ||
        config.train_end >= config.valid_end) {
        throw std::invalid_argument("run_pipeline: need train_end < valid_end");
    }
    if (config.jobs < 1) {
        throw std::invalid_argument("run_pipeline: jobs must be at least 1");
    }
    std::filesystem::create_directories(out_dir);

    const std::vector<ingest::OrderRecord> orders = run_stage("ingest", [&] {
        auto records = ingest::parse_orders_file(config.orders_csv.string());
        records = ingest::restrict_orders(records, config.article, config.cutoff);
        if (records.empty()) {
            throw std::runtime_error("no orders for article " + config.article +
                                     " up to " + format_date(config.cutoff));
        }
        const ingest::WeightedStats stats = ingest::weighted_price_stats(records);
        return ingest::zscore_filter(records, stats, config.zscore_threshold);
    });

    struct WeeklyData {
        weekly::WeeklySeries full;
        weekly::SplitSeries split;
        weekly::SeriesTensor tensor;
    };
    const WeeklyData data = run_stage("weekly", [&] {
        auto series = weekly::resample_weekly(orders);
        series = weekly::trim_leading_gap(series, config.gap_max);
        series = weekly::fill_gaps(series, config.gap_max);
        auto split = weekly::split_series(series, config.train_end, config.valid_end);
        if (split.train.empty() || split.valid.empty() || split.test.empty()) {
            throw std::runtime_error("empty train, validation, or test partition; "
                                     "check train_end and valid_end against the data");
        }
        const weekly::Scaler scaler = weekly::fit_scaler(split.train, config.scaler);
        auto tensor = weekly::make_tensor(series, scaler, config.train_end, config.valid_end);
        return WeeklyData{std::move(series), std::move(split), std::move(tensor)};
    });
    const weekly::SeriesTensor& tensor = data.tensor;
    const std::size_t total_weeks = tensor.price.size();
    const std::size_t test_begin = tensor.test_begin;

    PipelineResult result;
    ComparisonReport& report = result.report;
    report.test_weeks.assign(tensor.week_start.begin() + long(test_begin),
                             tensor.week_start.end());

    metrics::ForecastSeries naive_series;
    for (std::size_t t = test_begin; t < total_weeks; ++t) {
        naive_series.add(tensor.week_start[t], tensor.price[t - 1], tensor.price[t],
                         tensor.price[t - 1]);
    }
    report.naive = metrics::naive_metrics(naive_series);

    std::map<std::string, double> timings;
    const auto push_family = [&](const std::string& name, metrics::ForecastSeries fs,
                                 json selection, double seconds) {
        if (fs.week_start != report.test_weeks) {
            throw std::runtime_error(name + ": test weeks differ from the common set");
        }
        FamilyOutcome outcome;
        outcome.metrics = metrics::compute_metrics(fs);
        outcome.beats_naive = outcome.metrics.rmse <= report.naive.rmse;
        outcome.tuning_seconds = seconds;
        outcome.selection = std::move(selection);
        metrics::save_forecast_csv(fs, out_dir / ("forecast_" + name + ".csv"));
        report.families.emplace_back(name, std::move(outcome));
        result.forecasts.emplace(name, std::move(fs));
        timings[name] = seconds;
    };
    const auto now = [] { return std::chrono::steady_clock::now(); };
    const auto elapsed = [](auto t0, auto t1) {
        return std::chrono::duration<double>(t1 - t0).count();
    };

    {
        const auto t0 = now();
        run_stage("arima", [&] {
            std::vector<double> log_price(total_weeks);
            for (std::size_t t = 0; t < total_weeks; ++t) {
                log_price[t] = std::log(tensor.price[t]);
            }
            const std::vector<double> head(log_price.begin(),
                                           log_price.begin() + long(test_begin));
            const arima::ArimaFit fit = arima::select_arima(
                head, arima::default_grid(config.arima_pmax, config.arima_qmax,
                                          config.arima_d));
            const arima::RollingForecast roll =
                arima::rolling_forecast(fit, log_price, test_begin, config.arima_refit);
            metrics::ForecastSeries fs;
            for (std::size_t i = 0; i < roll.price_hat.size(); ++i) {
                const std::size_t t = test_begin + i;
                fs.add(tensor.week_start[t], tensor.price[t - 1], tensor.price[t],
                       roll.price_hat[i]);
            }
            json sel;
            sel["p"] = fit.spec.p;
            sel["d"] = fit.spec.d;
            sel["q"] = fit.spec.q;
            sel["phi"] = std::vector<double>(fit.phi.begin(), fit.phi.end());
            sel["theta"] = std::vector<double>(fit.theta.begin(), fit.theta.end());
            sel["bic"] = fit.bic;
            sel["sigma2"] = fit.sigma2;
            sel["boundary_warning"] = fit.boundary_warning;
            sel["refit_each_step"] = config.arima_refit;
            push_family("arima", std::move(fs), std::move(sel), elapsed(t0, now()));
        });
    }

    {
        const auto t0 = now();
        run_stage("additive", [&] {
            const additive::AdditiveGridResult grid = additive::grid_search_additive(
                data.split.train, data.split.valid, config.tau_grid, config.sigma_grid,
                config.additive, config.jobs);
            std::string cells = "tau,sigma,valid_rmse,failed\n";
            for (const additive::AdditiveGridCell& cell : grid.cells) {
                cells += io::format_double(cell.tau);
                cells += ',' + io::format_double(cell.sigma_season);
                cells += ',' + io::format_double(cell.valid_rmse);
                cells += cell.failed ? ",1\n" : ",0\n";
            }
            io::write_atomic(out_dir / "grid_additive.csv", cells);
            const additive::AdditiveEval eval = additive::expanding_window_eval(
                grid.best, data.full, report.test_weeks.front());
            json sel;
            sel["tau"] = grid.best.tau;
            sel["sigma"] = grid.best.sigma_season;
            sel["valid_rmse"] = grid.valid_rmse;
            push_family("additive", eval.forecasts, std::move(sel), elapsed(t0, now()));
        });
    }

    const auto nn_family = [&](const std::string& name, neural::Family family, int repeats,
                               const std::vector<int>& window_lengths,
                               std::uint64_t family_seed) {
        const auto t0 = now();
        run_stage(name.c_str(), [&] {
            neural::WindowBank bank;
            std::map<int, weekly::WindowSet> test_by_n;
            std::map<int, weekly::WindowSet> refit_by_n;
            for (int n : window_lengths) {
                const weekly::WindowSet all =
                    weekly::make_supervised(tensor.scaled, tensor.price, n);
                auto parts = weekly::split_windows(all, tensor.valid_begin, test_begin);
                refit_by_n[n] = concat_windows(parts[0], parts[1]);
                bank[n] = {std::move(parts[0]), std::move(parts[1])};
                test_by_n[n] = std::move(parts[2]);
            }
            neural::GridConfig gc;
            gc.train = config.train;
            gc.train.seed = family_seed;
            gc.jobs = config.jobs;
            gc.csv_path = out_dir / ("grid_" + name + ".csv");
            gc.config_limit = config.nn_config_limit;
            const neural::GridSearchResult grid =
                neural::grid_search_nn(family, bank, repeats, gc);

            neural::TrainConfig refit_config = config.train;
            refit_config.seed = Rng::mix(family_seed, std::uint64_t(-1));
            const int n_best = grid.best_spec.window;
            const neural::RefitResult refit = neural::refit_and_forecast(
                grid.best_spec, grid.best_stopped_epoch, refit_by_n.at(n_best),
                test_by_n.at(n_best), refit_config);

            const weekly::WindowSet& test = test_by_n.at(n_best);
            metrics::ForecastSeries fs;
            for (std::size_t i = 0; i < test.size(); ++i) {
                const std::size_t row = test.target_rows[i];
                fs.add(tensor.week_start[row], tensor.price[row - 1], tensor.price[row],
                       tensor.price[row - 1] + refit.delta_hat(Eigen::Index(i)));
            }
            const neural::NetworkSpec& s = grid.best_spec;
            json sel;
            sel["config_index"] = grid.best_config_index;
            sel["repeat"] = grid.best_repeat;
            sel["l"] = s.lstm_layers;
            sel["units"] = s.units;
            sel["dropout"] = s.dropout;
            sel["alpha"] = s.alpha;
            sel["filters"] = s.filters;
            sel["kernel"] = s.kernel;
            sel["pad1"] = neural::padding_name(s.pad1);
            sel["pad2"] = neural::padding_name(s.pad2);
            sel["window"] = s.window;
            sel["stopped_epoch"] = grid.best_stopped_epoch;
            sel["valid_rmse"] = grid.best_valid_rmse;
            sel["train_rmse"] = grid.best_train_rmse;
            push_family(name, std::move(fs), std::move(sel), elapsed(t0, now()));
        });
    };
    nn_family("nn_A", neural::Family::A, config.nn_repeats_a, {4},
              Rng::mix(config.seed, 0xA));
    nn_family("nn_B", neural::Family::B, config.nn_repeats_b, {4, 8, 12},
              Rng::mix(config.seed, 0xB));

    run_stage("report", [&] {
        write_report(report, out_dir / "report.json");
        json times;
        for (const auto& [name, seconds] : timings) {
            times[name] = seconds;
        }
        io::write_atomic(out_dir / "timings.json", times.dump(2) + "\n");
    });
    return result;
}

json report_to_json(const ComparisonReport& report) {
    json j;
    j["schema_version"] = 1;
    json weeks = json::array();
    for (Date d : report.test_weeks) {
        weeks.push_back(format_date(d));
    }
    j["test_weeks"] = std::move(weeks);
    j["naive"] = metrics_to_json(report.naive);
    json families;
    for (const auto& [name, outcome] : report.families) {
        json f;
        f["metrics"] = metrics_to_json(outcome.metrics);
        f["beats_naive"] = outcome.beats_naive;
        f["selection"] = outcome.selection;
        families[name] = std::move(f);
    }
    j["families"] = std::move(families);
    return j;
}

void write_report(const ComparisonReport& report, const std::filesystem::path& path) {
    io::write_atomic(path, report_to_json(report).dump(2) + "\n");
}

}
