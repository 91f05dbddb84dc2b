#include "pricecast/harness.hpp"
#include "pricecast/io.hpp"
#include "pricecast/stats.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
namespace pc = pricecast;

/// Shared command-line state: the global flags plus the optional config
/// file they may fall back to. Resolution order everywhere is explicit
/// flag, then config value, then built-in default.
struct Globals {
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 1;
    bool jobs_set = false;
    std::string config_path;
    pc::harness::PipelineConfig config;
    bool have_config = false;

    std::uint64_t pick_seed() const { return seed_set ? seed : config.seed; }
    int pick_jobs() const { return jobs_set ? jobs : config.jobs; }
};

std::string pick(const std::string& flag, const std::string& from_config) {
    return flag.empty() ? from_config : flag;
}

pc::Date pick_date(const std::string& flag, pc::Date from_config, const char* what) {
    if (!flag.empty()) {
        return pc::parse_date(flag);
    }
    if (from_config == pc::Date{}) {
        throw CLI::ValidationError(std::string(what) +
                                   " is required (flag or config file)");
    }
    return from_config;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const std::string& field : pc::io::split_line(text, ',')) {
        out.push_back(pc::io::parse_double(pc::io::trim(field)));
    }
    return out;
}

void emit(const json& j, const std::string& output) {
    if (output.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        pc::io::write_atomic(output, j.dump(2) + "\n");
    }
}

json adf_to_json(const pc::stats::AdfResult& adf) {
    json j;
    j["statistic"] = adf.statistic;
    j["lags_used"] = adf.lags_used;
    j["critical_values"] = adf.critical_values;
    j["reject_unit_root"] = adf.reject_unit_root;
    return j;
}

json ljung_box_to_json(const pc::stats::LjungBoxResult& lb) {
    json rows = json::array();
    for (const pc::stats::LjungBoxEntry& e : lb.entries) {
        rows.push_back({{"lag", e.lag},
                        {"q_stat", e.q_stat},
                        {"chi2_95", e.chi2_95},
                        {"white_noise_ok", e.white_noise_ok}});
    }
    return rows;
}

json metrics_to_json(const pc::metrics::MetricsReport& m) {
    return {{"rmse", m.rmse}, {"mae", m.mae}, {"mape", m.mape}, {"weeks", m.weeks}};
}

std::vector<double> prices_of(const pc::weekly::WeeklySeries& series) {
    std::vector<double> p;
    p.reserve(series.size());
    for (const pc::weekly::WeeklyRow& row : series.rows) {
        p.push_back(row.avg_price);
    }
    return p;
}

/// Index of the first row dated after the boundary.
std::size_t first_row_after(const pc::weekly::WeeklySeries& series, pc::Date boundary) {
    std::size_t i = 0;
    while (i < series.size() && series.rows[i].week_start <= boundary) {
        ++i;
    }
    return i;
}

int run_preprocess(const Globals& g, const std::string& input, const std::string& article,
                   const std::string& cutoff, double threshold, int gap_max,
                   const std::string& output) {
    const std::string art = pick(article, g.config.article);
    if (art.empty()) {
        throw CLI::ValidationError("--article is required (flag or config file)");
    }
    const pc::Date cut = cutoff.empty() ? g.config.cutoff : pc::parse_date(cutoff);
    const double thr = threshold > 0.0 ? threshold : g.config.zscore_threshold;
    const int gap = gap_max > 0 ? gap_max : g.config.gap_max;

    auto records = pc::ingest::parse_orders_file(input);
    const std::size_t parsed = records.size();
    records = pc::ingest::restrict_orders(records, art, cut);
    const std::size_t restricted = records.size();
    if (records.empty()) {
        throw std::runtime_error("no orders for article " + art + " up to " +
                                 pc::format_date(cut));
    }
    const auto stats = pc::ingest::weighted_price_stats(records);
    records = pc::ingest::zscore_filter(records, stats, thr);

    auto series = pc::weekly::resample_weekly(records);
    series = pc::weekly::trim_leading_gap(series, gap);
    series = pc::weekly::fill_gaps(series, gap);
    pc::weekly::save_weekly_csv(series, output);

    std::size_t interpolated = 0;
    for (const auto& row : series.rows) {
        interpolated += row.interpolated ? 1 : 0;
    }
    std::cout << "parsed " << parsed << " orders, " << restricted << " for article " << art
              << ", kept " << records.size() << " after the outlier filter\n"
              << series.size() << " weeks from " << pc::format_date(series.rows.front().week_start)
              << " to " << pc::format_date(series.rows.back().week_start) << " ("
              << interpolated << " interpolated) -> " << output << '\n';
    return 0;
}

int run_analyze(const std::string& input, int max_lag, const std::string& output) {
    const auto series = pc::weekly::load_weekly_csv(input);
    const auto log_price = pc::stats::log_series(prices_of(series));
    const auto increments = pc::stats::diff(log_price);
    if (increments.size() < 3) {
        throw std::runtime_error("series too short to analyze");
    }
    const int lag = std::min<int>(max_lag, int(increments.size()) - 1);

    json j;
    j["weeks"] = series.size();
    j["adf_log_price"] = adf_to_json(pc::stats::adf_test(log_price));
    j["adf_increments"] = adf_to_json(pc::stats::adf_test(increments));
    j["acf_increments"] = pc::stats::acf(increments, lag);
    j["pacf_increments"] = pc::stats::pacf(increments, lag);
    j["ljung_box_increments"] = ljung_box_to_json(pc::stats::ljung_box(increments));
    emit(j, output);
    return 0;
}

std::pair<int, int> parse_grid_flag(const std::string& grid) {
    const auto parts = pc::io::split_line(grid, ',');
    if (parts.size() != 2) {
        throw CLI::ValidationError("--grid expects pmax,qmax");
    }
    return {int(pc::io::parse_int(pc::io::trim(parts[0]))),
            int(pc::io::parse_int(pc::io::trim(parts[1])))};
}

int run_fit_arima(const Globals& g, const std::string& input, const std::string& grid,
                  int d, const std::string& train_end, const std::string& valid_end,
                  const std::string& output) {
    const auto series = pc::weekly::load_weekly_csv(input);
    auto log_price = pc::stats::log_series(prices_of(series));
    // With split dates the fit sees train+valid only; otherwise everything.
    if (!valid_end.empty()) {
        log_price.resize(first_row_after(series, pc::parse_date(valid_end)));
    } else if (!train_end.empty()) {
        log_price.resize(first_row_after(series, pc::parse_date(train_end)));
    }
    auto [pmax, qmax] = grid.empty()
                            ? std::pair<int, int>{g.config.arima_pmax, g.config.arima_qmax}
                            : parse_grid_flag(grid);

    const auto candidates = pc::arima::default_grid(pmax, qmax, d);
    json table = json::array();
    for (const auto& spec : candidates) {
        const auto fit = pc::arima::fit_arima(log_price, spec);
        table.push_back({{"p", spec.p},
                         {"d", spec.d},
                         {"q", spec.q},
                         {"bic", fit.bic},
                         {"loglik", fit.loglik},
                         {"boundary_warning", fit.boundary_warning}});
    }
    const auto best = pc::arima::select_arima(log_price, candidates);
    json j;
    j["fitted_weeks"] = log_price.size();
    j["bic_table"] = std::move(table);
    j["selected"] = {{"p", best.spec.p},
                     {"d", best.spec.d},
                     {"q", best.spec.q},
                     {"phi", std::vector<double>(best.phi.begin(), best.phi.end())},
                     {"theta", std::vector<double>(best.theta.begin(), best.theta.end())},
                     {"sigma2", best.sigma2},
                     {"bic", best.bic},
                     {"boundary_warning", best.boundary_warning}};
    j["residual_ljung_box"] = ljung_box_to_json(pc::arima::residual_diagnostics(best));
    emit(j, output);
    return 0;
}

int run_forecast_arima(const Globals& g, const std::string& input, const std::string& grid,
                       int d, const std::string& train_end, const std::string& valid_end,
                       bool refit, const std::string& output) {
    const auto series = pc::weekly::load_weekly_csv(input);
    const auto prices = prices_of(series);
    const auto log_price = pc::stats::log_series(prices);
    const pc::Date boundary = pick_date(valid_end, g.config.valid_end, "--valid-end");
    const std::size_t test_begin = first_row_after(series, boundary);
    if (test_begin < 2 || test_begin >= series.size()) {
        throw std::runtime_error("--valid-end leaves no usable test span");
    }
    (void)train_end;     // the one-shot fit uses everything up to valid_end

    auto [pmax, qmax] = grid.empty()
                            ? std::pair<int, int>{g.config.arima_pmax, g.config.arima_qmax}
                            : parse_grid_flag(grid);
    const std::vector<double> head(log_price.begin(), log_price.begin() + long(test_begin));
    const auto fit = pc::arima::select_arima(head, pc::arima::default_grid(pmax, qmax, d));
    const auto roll = pc::arima::rolling_forecast(fit, log_price, test_begin, refit);

    pc::metrics::ForecastSeries fs;
    for (std::size_t i = 0; i < roll.price_hat.size(); ++i) {
        const std::size_t t = test_begin + i;
        fs.add(series.rows[t].week_start, prices[t - 1], prices[t], roll.price_hat[i]);
    }
    pc::metrics::save_forecast_csv(fs, output);

    json j;
    j["selected"] = {{"p", fit.spec.p}, {"d", fit.spec.d}, {"q", fit.spec.q}};
    j["refit_each_step"] = refit;
    j["metrics"] = metrics_to_json(pc::metrics::compute_metrics(fs));
    j["naive"] = metrics_to_json(pc::metrics::naive_metrics(fs));
    j["forecast_csv"] = output;
    std::cout << j.dump(2) << '\n';
    return 0;
}

pc::additive::DatedSeries observed_series(const pc::weekly::WeeklySeries& series,
                                          std::size_t end_row) {
    pc::additive::DatedSeries out;
    for (std::size_t i = 0; i < end_row; ++i) {
        if (!series.rows[i].interpolated) {
            out.emplace_back(series.rows[i].week_start, series.rows[i].avg_price);
        }
    }
    return out;
}

int run_fit_additive(const Globals& g, const std::string& input, double tau, double sigma,
                     int changepoints, double fraction, int harmonics,
                     const std::string& train_end, const std::string& output,
                     const std::string& changepoints_output) {
    const auto series = pc::weekly::load_weekly_csv(input);
    const std::size_t fit_end =
        train_end.empty() ? series.size()
                          : first_row_after(series, pc::parse_date(train_end));
    const auto observations = observed_series(series, fit_end);
    if (observations.size() < 10) {
        throw std::runtime_error("need at least 10 observed weeks to fit");
    }

    pc::additive::AdditiveConfig cfg = g.config.additive;
    cfg.tau = tau;
    cfg.sigma_season = sigma;
    if (changepoints > 0) {
        cfg.changepoints = changepoints;
    }
    if (fraction > 0.0) {
        cfg.changepoint_fraction = fraction;
    }
    if (harmonics > 0) {
        cfg.fourier_order = harmonics;
    }
    const auto params = pc::additive::fit_map(observations, cfg);

    std::string text = "week_start,observed,trend,seasonality,fitted,residual\n";
    double ss = 0.0;
    std::size_t fitted_rows = 0;
    for (const auto& [date, value] : observations) {
        const double t = double(pc::days_since_epoch(date));
        const double trend = pc::additive::trend_eval(params, t);
        const double season = pc::additive::seasonality_eval(params, t);
        const double fitted = trend + season;
        text += pc::format_date(date);
        text += ',' + pc::io::format_double(value);
        text += ',' + pc::io::format_double(trend);
        text += ',' + pc::io::format_double(season);
        text += ',' + pc::io::format_double(fitted);
        text += ',' + pc::io::format_double(value - fitted);
        text += '\n';
        ss += (value - fitted) * (value - fitted);
        ++fitted_rows;
    }
    pc::io::write_atomic(output, text);

    if (!changepoints_output.empty()) {
        std::string cp = "day,week_start,rate_change\n";
        for (Eigen::Index i = 0; i < params.changepoints.size(); ++i) {
            const double day = params.changepoints(i);
            cp += pc::io::format_double(day);
            cp += ',' + pc::format_date(pc::from_days_since_epoch(long(std::floor(day))));
            cp += ',' + pc::io::format_double(params.rate_adjust(i));
            cp += '\n';
        }
        pc::io::write_atomic(changepoints_output, cp);
    }

    json j;
    j["base_rate_per_day"] = params.base_rate;
    j["offset"] = params.offset;
    j["changepoints"] = params.changepoints.size();
    j["max_rate_change"] = params.rate_adjust.size() > 0
                               ? params.rate_adjust.cwiseAbs().maxCoeff()
                               : 0.0;
    j["train_rmse"] = std::sqrt(ss / double(fitted_rows));
    j["components_csv"] = output;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int run_grid_additive(const Globals& g, const std::string& input, const std::string& tau_list,
                      const std::string& sigma_list, const std::string& train_end,
                      const std::string& valid_end, const std::string& output) {
    const auto series = pc::weekly::load_weekly_csv(input);
    const pc::Date t_end = pick_date(train_end, g.config.train_end, "--train-end");
    const pc::Date v_end = pick_date(valid_end, g.config.valid_end, "--valid-end");
    const auto split = pc::weekly::split_series(series, t_end, v_end);
    if (split.train.empty() || split.valid.empty()) {
        throw std::runtime_error("train or validation partition is empty");
    }
    const auto tau_grid = tau_list.empty() ? g.config.tau_grid : parse_double_list(tau_list);
    const auto sigma_grid =
        sigma_list.empty() ? g.config.sigma_grid : parse_double_list(sigma_list);
    const std::string out_path = output.empty() ? "grid_additive.csv" : output;

    const auto result = pc::additive::grid_search_additive(
        split.train, split.valid, tau_grid, sigma_grid, g.config.additive, g.pick_jobs());

    std::string text = "tau,sigma,valid_rmse,failed\n";
    for (const auto& cell : result.cells) {
        text += pc::io::format_double(cell.tau);
        text += ',' + pc::io::format_double(cell.sigma_season);
        text += ',' + pc::io::format_double(cell.valid_rmse);
        text += cell.failed ? ",1\n" : ",0\n";
    }
    pc::io::write_atomic(out_path, text);

    json j;
    j["best"] = {{"tau", result.best.tau}, {"sigma", result.best.sigma_season}};
    j["valid_rmse"] = result.valid_rmse;
    j["cells"] = result.cells.size();
    j["grid_csv"] = out_path;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int run_grid_nn(const Globals& g, const std::string& input, const std::string& family_name,
                int repeats, const std::string& train_end, const std::string& valid_end,
                const std::string& scaler_name, const std::string& csv_path, int limit,
                const std::string& weights_path) {
    const pc::neural::Family family = pc::neural::family_from_name(family_name);
    const auto series = pc::weekly::load_weekly_csv(input);
    const pc::Date t_end = pick_date(train_end, g.config.train_end, "--train-end");
    const pc::Date v_end = pick_date(valid_end, g.config.valid_end, "--valid-end");
    const auto split = pc::weekly::split_series(series, t_end, v_end);
    if (split.train.empty() || split.valid.empty()) {
        throw std::runtime_error("train or validation partition is empty");
    }
    const pc::weekly::ScalerKind kind = scaler_name == "zscore"
                                            ? pc::weekly::ScalerKind::ZScore
                                            : pc::weekly::ScalerKind::MinMax;
    const auto scaler = pc::weekly::fit_scaler(split.train, kind);
    const auto tensor = pc::weekly::make_tensor(series, scaler, t_end, v_end);

    const std::vector<int> lengths =
        family == pc::neural::Family::A ? std::vector<int>{4} : std::vector<int>{4, 8, 12};
    pc::neural::WindowBank bank;
    std::map<int, pc::weekly::WindowSet> trainvalid;
    for (int n : lengths) {
        const auto all = pc::weekly::make_supervised(tensor.scaled, tensor.price, n);
        auto parts = pc::weekly::split_windows(all, tensor.valid_begin, tensor.test_begin);
        pc::weekly::WindowSet tv = parts[0];
        tv.inputs.insert(tv.inputs.end(), parts[1].inputs.begin(), parts[1].inputs.end());
        const Eigen::Index n0 = tv.targets.size();
        tv.targets.conservativeResize(n0 + parts[1].targets.size());
        tv.targets.tail(parts[1].targets.size()) = parts[1].targets;
        tv.target_rows.insert(tv.target_rows.end(), parts[1].target_rows.begin(),
                              parts[1].target_rows.end());
        trainvalid[n] = std::move(tv);
        bank[n] = {std::move(parts[0]), std::move(parts[1])};
    }

    pc::neural::GridConfig gc;
    gc.train = g.config.train;
    gc.train.seed = g.pick_seed();
    gc.jobs = g.pick_jobs();
    gc.csv_path = csv_path.empty() ? "grid_nn_" + family_name + ".csv" : csv_path;
    gc.config_limit = limit > 0 ? limit : g.config.nn_config_limit;

    const auto result = pc::neural::grid_search_nn(family, bank, repeats, gc);

    pc::neural::TrainConfig refit_config = gc.train;
    refit_config.seed = pc::Rng::mix(gc.train.seed, std::uint64_t(-1));
    pc::weekly::WindowSet no_test;
    no_test.window = result.best_spec.window;
    const auto refit = pc::neural::refit_and_forecast(
        result.best_spec, result.best_stopped_epoch, trainvalid.at(result.best_spec.window),
        no_test, refit_config);
    const std::string weights =
        weights_path.empty() ? "nn_" + family_name + ".bin" : weights_path;
    pc::neural::save_network(weights, refit.params, result.best_stopped_epoch);

    const pc::neural::NetworkSpec& s = result.best_spec;
    json j;
    j["family"] = family_name;
    j["configurations"] = pc::neural::enumerate_grid(family).size();
    j["evaluated_rows"] = result.entries.size();
    j["best"] = {{"config_index", result.best_config_index},
                 {"l", s.lstm_layers},
                 {"units", s.units},
                 {"dropout", s.dropout},
                 {"alpha", s.alpha},
                 {"filters", s.filters},
                 {"kernel", s.kernel},
                 {"pad1", pc::neural::padding_name(s.pad1)},
                 {"pad2", pc::neural::padding_name(s.pad2)},
                 {"window", s.window},
                 {"stopped_epoch", result.best_stopped_epoch},
                 {"valid_rmse", result.best_valid_rmse},
                 {"train_rmse", result.best_train_rmse}};
    j["grid_csv"] = gc.csv_path.string();
    j["weights"] = weights;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int run_evaluate(const std::string& forecast, const std::string& output) {
    const auto fs = pc::metrics::load_forecast_csv(forecast);
    const auto m = pc::metrics::compute_metrics(fs);
    const auto naive = pc::metrics::naive_metrics(fs);
    json j;
    j["metrics"] = metrics_to_json(m);
    j["naive"] = metrics_to_json(naive);
    j["beats_naive"] = m.rmse <= naive.rmse;
    emit(j, output);
    return 0;
}

int run_compare(const Globals& g, const std::string& out_dir) {
    if (!g.have_config) {
        throw CLI::ValidationError("compare needs --config");
    }
    pc::harness::PipelineConfig config = g.config;
    if (g.seed_set) {
        config.seed = g.seed;
    }
    if (g.jobs_set) {
        config.jobs = g.jobs;
    }
    const auto result = pc::harness::run_pipeline(config, out_dir);

    std::cout << "family      rmse      mae       mape      beats_naive\n";
    const auto line = [](const std::string& name, const pc::metrics::MetricsReport& m,
                         const char* flag) {
        std::cout << name;
        for (std::size_t i = name.size(); i < 12; ++i) {
            std::cout << ' ';
        }
        std::cout << pc::io::format_double(m.rmse) << "  " << pc::io::format_double(m.mae)
                  << "  " << pc::io::format_double(m.mape) << "  " << flag << '\n';
    };
    for (const auto& [name, outcome] : result.report.families) {
        line(name, outcome.metrics, outcome.beats_naive ? "yes" : "no");
    }
    line("naive", result.report.naive, "-");
    std::cout << result.report.test_weeks.size() << " test weeks; report in " << out_dir
              << "/report.json\n";
    return 0;
}

int run_synth(const Globals& g, const std::string& output, const std::string& article,
              std::size_t weeks, int orders_per_week, double base_price, double weekly_sigma,
              double order_sigma, double outlier_rate, const std::string& start) {
    pc::harness::SyntheticOrdersConfig cfg;
    if (!article.empty()) {
        cfg.article = article;
    }
    cfg.weeks = weeks;
    cfg.orders_per_week = orders_per_week;
    cfg.base_price = base_price;
    cfg.weekly_sigma = weekly_sigma;
    cfg.order_sigma = order_sigma;
    cfg.outlier_rate = outlier_rate;
    cfg.seed = g.pick_seed();
    if (!start.empty()) {
        cfg.start = pc::parse_date(start);
    }
    const auto records = pc::harness::simulate_orders(cfg);
    pc::harness::write_orders_csv(records, output);
    std::cout << "wrote " << records.size() << " orders over " << weeks << " weeks to "
              << output << '\n';
    return 0;
}

}

int main(int argc, char** argv) {
    CLI::App app{"Wholesale price preprocessing, tuning, and forecast comparison"};
    app.require_subcommand(1);
    Globals g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Base rng seed (default 0)");
    auto* jobs_opt = app.add_option("--jobs", g.jobs, "Worker threads (default 1)");
    app.add_option("--config", g.config_path, "JSON config with splits, grids, thresholds");

    std::string input, output, article, cutoff, train_end, valid_end;
    double threshold = -1.0;
    int gap_max = -1;

    auto* preprocess = app.add_subcommand(
        "preprocess", "Orders csv -> cleaned gap-filled weekly csv");
    preprocess->add_option("--input", input, "Orders csv")->required();
    preprocess->add_option("--article", article, "Article code to keep");
    preprocess->add_option("--cutoff", cutoff, "Last order date to keep (YYYY-MM-DD)");
    preprocess->add_option("--threshold", threshold, "Outlier z-score threshold (default 4)");
    preprocess->add_option("--gap-max", gap_max, "Largest interpolatable gap, weeks");
    preprocess->add_option("--output", output, "Weekly csv")->required();

    int max_lag = 24;
    auto* analyze = app.add_subcommand(
        "analyze", "Stationarity and correlation diagnostics of a weekly csv");
    analyze->add_option("--input", input, "Weekly csv")->required();
    analyze->add_option("--max-lag", max_lag, "Largest acf/pacf lag (default 24)");
    analyze->add_option("--output", output, "Write json here instead of stdout");

    std::string grid;
    int d = 1;
    auto* fit_arima = app.add_subcommand("fit-arima", "BIC table and selected order");
    fit_arima->add_option("--input", input, "Weekly csv")->required();
    fit_arima->add_option("--grid", grid, "pmax,qmax (default 3,3)");
    fit_arima->add_option("--d", d, "Differencing order (default 1)");
    fit_arima->add_option("--train-end", train_end, "Fit up to this date");
    fit_arima->add_option("--valid-end", valid_end, "Fit up to this date instead");
    fit_arima->add_option("--output", output, "Write json here instead of stdout");

    bool refit = false;
    auto* forecast_arima =
        app.add_subcommand("forecast-arima", "One-step test forecasts of the selected order");
    forecast_arima->add_option("--input", input, "Weekly csv")->required();
    forecast_arima->add_option("--grid", grid, "pmax,qmax (default 3,3)");
    forecast_arima->add_option("--d", d, "Differencing order (default 1)");
    forecast_arima->add_option("--train-end", train_end, "Unused, kept for symmetry");
    forecast_arima->add_option("--valid-end", valid_end, "Test starts after this date");
    forecast_arima->add_flag("--refit", refit, "Re-estimate coefficients every step");
    forecast_arima->add_option("--output", output, "Forecast csv")->required();

    double tau = 0.05, sigma = 1.0, fraction = -1.0;
    int changepoints = -1, harmonics = -1;
    std::string changepoints_output;
    auto* fit_additive =
        app.add_subcommand("fit-additive", "Trend/seasonality decomposition at fixed priors");
    fit_additive->add_option("--input", input, "Weekly csv")->required();
    fit_additive->add_option("--tau", tau, "Changepoint prior scale")->required();
    fit_additive->add_option("--sigma", sigma, "Seasonal prior scale")->required();
    fit_additive->add_option("--changepoints", changepoints, "Candidate count (default 25)");
    fit_additive->add_option("--fraction", fraction, "History share holding them (default 0.8)");
    fit_additive->add_option("--harmonics", harmonics, "Yearly Fourier order (default 10)");
    fit_additive->add_option("--train-end", train_end, "Fit up to this date");
    fit_additive->add_option("--output", output, "Components csv")->required();
    fit_additive->add_option("--changepoints-output", changepoints_output,
                             "Also write the changepoint table here");

    std::string tau_list, sigma_list;
    auto* grid_additive =
        app.add_subcommand("grid-additive", "Prior grid search on the validation year");
    grid_additive->add_option("--input", input, "Weekly csv")->required();
    grid_additive->add_option("--tau-grid", tau_list, "Comma list (default 0.005..0.5)");
    grid_additive->add_option("--sigma-grid", sigma_list, "Comma list (default 0.01..2)");
    grid_additive->add_option("--train-end", train_end, "Training ends here");
    grid_additive->add_option("--valid-end", valid_end, "Validation ends here");
    grid_additive->add_option("--output", output, "Grid csv (default grid_additive.csv)");

    std::string family, csv_path, weights_path, scaler = "minmax";
    int repeats = -1, limit = 0;
    auto* grid_nn = app.add_subcommand("grid-nn", "Architecture grid search for one family");
    grid_nn->add_option("--input", input, "Weekly csv")->required();
    grid_nn->add_option("--family", family, "A or B")->required();
    grid_nn->add_option("--repeats", repeats, "Trainings per configuration");
    grid_nn->add_option("--train-end", train_end, "Training ends here");
    grid_nn->add_option("--valid-end", valid_end, "Validation ends here");
    grid_nn->add_option("--scaler", scaler, "minmax or zscore (default minmax)");
    grid_nn->add_option("--csv", csv_path, "Append-only results csv, resumes if present");
    grid_nn->add_option("--limit", limit, "Only the first N configurations (smoke runs)");
    grid_nn->add_option("--weights", weights_path, "Weight file (default nn_<family>.bin)");

    std::string forecast_path;
    auto* evaluate = app.add_subcommand("evaluate", "Metrics of a forecast csv");
    evaluate->add_option("--forecast", forecast_path, "Forecast csv")->required();
    evaluate->add_option("--output", output, "Write json here instead of stdout");

    std::string out_dir = "out";
    auto* compare = app.add_subcommand("compare", "Full four-family comparison pipeline");
    compare->add_option("--out", out_dir, "Output directory (default out)");

    std::size_t weeks = 250;
    int orders_per_week = 6;
    double base_price = 10.0, weekly_sigma = 0.01, order_sigma = 0.002, outlier_rate = 0.0;
    std::string start;
    auto* synth = app.add_subcommand("synth", "Synthetic orders csv for smoke tests");
    synth->add_option("--output", output, "Orders csv")->required();
    synth->add_option("--article", article, "Article code (default 100001)");
    synth->add_option("--weeks", weeks, "Weeks to generate (default 250)");
    synth->add_option("--orders-per-week", orders_per_week, "Orders per week (default 6)");
    synth->add_option("--base-price", base_price, "Starting price (default 10)");
    synth->add_option("--weekly-sigma", weekly_sigma, "Weekly relative drift (default 0.01)");
    synth->add_option("--order-sigma", order_sigma, "Within-week spread (default 0.002)");
    synth->add_option("--outlier-rate", outlier_rate, "Misprint probability (default 0)");
    synth->add_option("--start", start, "First Monday (default 2018-01-01)");

    CLI11_PARSE(app, argc, argv);

    try {
        g.seed_set = seed_opt->count() > 0;
        g.jobs_set = jobs_opt->count() > 0;
        if (!g.config_path.empty()) {
            g.config = pc::harness::load_pipeline_config(g.config_path);
            g.have_config = true;
        }

        if (*preprocess) {
            return run_preprocess(g, input, article, cutoff, threshold, gap_max, output);
        }
        if (*analyze) {
            return run_analyze(input, max_lag, output);
        }
        if (*fit_arima) {
            return run_fit_arima(g, input, grid, d, train_end, valid_end, output);
        }
        if (*forecast_arima) {
            return run_forecast_arima(g, input, grid, d, train_end, valid_end, refit, output);
        }
        if (*fit_additive) {
            return run_fit_additive(g, input, tau, sigma, changepoints, fraction, harmonics,
                                    train_end, output, changepoints_output);
        }
        if (*grid_additive) {
            return run_grid_additive(g, input, tau_list, sigma_list, train_end, valid_end,
                                     output);
        }
        if (*grid_nn) {
            const int reps = repeats > 0 ? repeats
                                         : (family == "A" ? g.config.nn_repeats_a
                                                          : g.config.nn_repeats_b);
            return run_grid_nn(g, input, family, reps, train_end, valid_end, scaler,
                               csv_path, limit, weights_path);
        }
        if (*evaluate) {
            return run_evaluate(forecast_path, output);
        }
        if (*compare) {
            return run_compare(g, out_dir);
        }
        if (*synth) {
            return run_synth(g, output, article, weeks, orders_per_week, base_price,
                             weekly_sigma, order_sigma, outlier_rate, start);
        }
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
