#include "pricecast/metrics.hpp"

#include "pricecast/io.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pricecast::metrics {

namespace {

MetricsReport metrics_from_errors(const ForecastSeries& fs,
                                  const std::vector<double>& delta_hat) {
    const std::size_t n = fs.size();
    if (n == 0) {
        throw std::invalid_argument("compute_metrics: empty forecast series");
    }
    double sq = 0.0;
    double abs_sum = 0.0;
    double ape = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double err = delta_hat[i] - fs.delta[i];
        const double level = fs.price[i];
        const double level_hat = level + err;     // p_hat shares the same error
        if (!std::isfinite(err) || !std::isfinite(level_hat)) {
            throw std::runtime_error("compute_metrics: non-finite forecast");
        }
        if (level == 0.0) {
            throw std::runtime_error("compute_metrics: zero observed price");
        }
        sq += err * err;
        abs_sum += std::fabs(err);
        ape += std::fabs(level_hat - level) / std::fabs(level);
    }
    MetricsReport report;
    report.rmse = std::sqrt(sq / double(n));
    report.mae = abs_sum / double(n);
    report.mape = ape / double(n);
    report.weeks = n;
    return report;
}

}

void ForecastSeries::add(Date week, double prev_price, double observed, double predicted) {
    week_start.push_back(week);
    price.push_back(observed);
    price_hat.push_back(predicted);
    delta.push_back(observed - prev_price);
    delta_hat.push_back(predicted - prev_price);
}

MetricsReport compute_metrics(const ForecastSeries& fs) {
    return metrics_from_errors(fs, fs.delta_hat);
}

MetricsReport naive_metrics(const ForecastSeries& fs) {
    return metrics_from_errors(fs, std::vector<double>(fs.size(), 0.0));
}

void save_forecast_csv(const ForecastSeries& fs, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "week_start,p,p_hat,delta,delta_hat\n";
    for (std::size_t i = 0; i < fs.size(); ++i) {
        out << format_date(fs.week_start[i]) << ',' << io::format_double(fs.price[i]) << ','
            << io::format_double(fs.price_hat[i]) << ',' << io::format_double(fs.delta[i]) << ','
            << io::format_double(fs.delta_hat[i]) << '\n';
    }
    io::write_atomic(path, out.str());
}

ForecastSeries load_forecast_csv(const std::filesystem::path& path) {
    std::istringstream in(io::read_file(path));
    ForecastSeries fs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line_no == 1) {
            continue;
        }
        const auto fields = io::split_line(line, ',');
        if (fields.size() != 5) {
            throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                                     ": expected 5 fields");
        }
        fs.week_start.push_back(parse_date(fields[0]));
        fs.price.push_back(io::parse_double(fields[1]));
        fs.price_hat.push_back(io::parse_double(fields[2]));
        fs.delta.push_back(io::parse_double(fields[3]));
        fs.delta_hat.push_back(io::parse_double(fields[4]));
    }
    return fs;
}

}
