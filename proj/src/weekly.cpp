#include "pricecast/weekly.hpp"

#include "pricecast/io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace pricecast::weekly {

namespace {

// Average count of ISO weeks per year; the divisor that closes the cycle
// between week 52 and week 0.
constexpr double kWeeksPerYear = 52.1429;

long week_gap(const WeeklyRow& a, const WeeklyRow& b) {
    return (days_since_epoch(b.week_start) - days_since_epoch(a.week_start)) / 7;
}

double lerp(double a, double b, double f) {
    return a + (b - a) * f;
}

}

std::pair<double, double> time_embedding(int week_of_year) {
    if (week_of_year < 0 || week_of_year > 52) {
        throw std::invalid_argument("time_embedding: week index out of range");
    }
    const double angle = 2.0 * std::numbers::pi * double(week_of_year) / kWeeksPerYear;
    return {std::cos(angle), std::sin(angle)};
}

WeeklySeries resample_weekly(const std::vector<ingest::OrderRecord>& records) {
    std::map<Date, std::vector<const ingest::OrderRecord*>> buckets;
    for (const auto& rec : records) {
        buckets[monday_of_week(rec.date)].push_back(&rec);
    }
    WeeklySeries series;
    series.rows.reserve(buckets.size());
    for (const auto& [monday, orders] : buckets) {
        WeeklyRow row;
        row.week_start = monday;
        std::set<std::string> customers;
        double weight_sum = 0.0;
        for (const auto* o : orders) {
            row.quantity += double(o->quantity);
            row.orders += 1.0;
            row.on_sale += o->on_offer ? 1.0 : 0.0;
            customers.insert(o->customer_code);
            if (o->quantity > 0) {
                weight_sum += double(o->quantity);
            }
        }
        row.customers = double(customers.size());
        // Price and cost are averaged per unit sold, not per order line, so
        // the weight is the line quantity. All-zero quantities fall back to
        // equal weights.
        const bool unweighted = weight_sum <= 0.0;
        if (unweighted) {
            weight_sum = double(orders.size());
        }
        auto weight_of = [&](const ingest::OrderRecord* o) {
            if (unweighted) {
                return 1.0;
            }
            return o->quantity > 0 ? double(o->quantity) : 0.0;
        };
        double price_mean = 0.0;
        double cost_mean = 0.0;
        for (const auto* o : orders) {
            price_mean += weight_of(o) * o->unit_price;
            cost_mean += weight_of(o) * o->unit_cost;
        }
        price_mean /= weight_sum;
        cost_mean /= weight_sum;
        double price_var = 0.0;
        for (const auto* o : orders) {
            const double d = o->unit_price - price_mean;
            price_var += weight_of(o) * d * d;
        }
        price_var /= weight_sum;
        row.avg_price = price_mean;
        row.cost = cost_mean;
        row.price_std = std::sqrt(price_var);
        std::tie(row.week_cos, row.week_sin) = time_embedding(embedding_week(monday));
        series.rows.push_back(row);
    }
    return series;
}

WeeklySeries trim_leading_gap(const WeeklySeries& series, int gap_max) {
    if (gap_max < 1) {
        throw std::invalid_argument("trim_leading_gap: gap_max must be at least 1");
    }
    std::size_t first_kept = 0;
    for (std::size_t i = 1; i < series.rows.size(); ++i) {
        const long missing = week_gap(series.rows[i - 1], series.rows[i]) - 1;
        if (missing > gap_max) {
            first_kept = i;
        }
    }
    WeeklySeries trimmed;
    trimmed.rows.assign(series.rows.begin() + long(first_kept), series.rows.end());
    return trimmed;
}

WeeklySeries fill_gaps(const WeeklySeries& series, int gap_max) {
    WeeklySeries filled;
    for (std::size_t i = 0; i < series.rows.size(); ++i) {
        if (i == 0) {
            filled.rows.push_back(series.rows[i]);
            continue;
        }
        const WeeklyRow& prev = series.rows[i - 1];
        const WeeklyRow& next = series.rows[i];
        const long span = week_gap(prev, next);
        if (span <= 0) {
            throw std::invalid_argument("fill_gaps: weeks not strictly increasing");
        }
        const long missing = span - 1;
        if (missing > gap_max) {
            throw std::runtime_error("fill_gaps: gap of " + std::to_string(missing) +
                                     " weeks exceeds the maximum of " + std::to_string(gap_max) +
                                     " (trim the series first)");
        }
        for (long j = 1; j <= missing; ++j) {
            const double f = double(j) / double(span);
            WeeklyRow row;
            row.week_start = prev.week_start + std::chrono::days{7 * j};
            row.cost = lerp(prev.cost, next.cost, f);
            row.price_std = lerp(prev.price_std, next.price_std, f);
            row.avg_price = lerp(prev.avg_price, next.avg_price, f);
            std::tie(row.week_cos, row.week_sin) = time_embedding(embedding_week(row.week_start));
            row.interpolated = true;
            filled.rows.push_back(row);
        }
        filled.rows.push_back(next);
    }
    return filled;
}

SplitSeries split_series(const WeeklySeries& series, Date train_end, Date valid_end) {
    if (!(train_end < valid_end)) {
        throw std::invalid_argument("split_series: train_end must precede valid_end");
    }
    SplitSeries out;
    for (const auto& row : series.rows) {
        if (row.week_start <= train_end) {
            out.train.rows.push_back(row);
        } else if (row.week_start <= valid_end) {
            out.valid.rows.push_back(row);
        } else {
            out.test.rows.push_back(row);
        }
    }
    return out;
}

Eigen::MatrixXd input_matrix(const WeeklySeries& series) {
    Eigen::MatrixXd m(series.rows.size(), 9);
    for (std::size_t i = 0; i < series.rows.size(); ++i) {
        const WeeklyRow& r = series.rows[i];
        m.row(Eigen::Index(i)) << r.quantity, r.customers, r.orders, r.on_sale, r.cost,
            r.week_cos, r.week_sin, r.price_std, r.avg_price;
    }
    return m;
}

Scaler fit_scaler(const WeeklySeries& train, ScalerKind kind) {
    if (train.empty()) {
        throw std::invalid_argument("fit_scaler: empty training series");
    }
    const Eigen::MatrixXd m = input_matrix(train);
    Scaler s;
    s.kind = kind;
    s.col_min = m.colwise().minCoeff();
    s.col_max = m.colwise().maxCoeff();
    s.col_mean = m.colwise().mean();
    const Eigen::MatrixXd centered = m.rowwise() - s.col_mean.transpose();
    s.col_std = (centered.array().square().colwise().mean()).sqrt();
    return s;
}

Eigen::MatrixXd apply_scaler(const Scaler& scaler, const Eigen::MatrixXd& columns) {
    if (columns.cols() != scaler.col_min.size()) {
        throw std::invalid_argument("apply_scaler: column count mismatch");
    }
    Eigen::MatrixXd out(columns.rows(), columns.cols());
    for (Eigen::Index c = 0; c < columns.cols(); ++c) {
        double shift = 0.0;
        double scale = 0.0;
        if (scaler.kind == ScalerKind::MinMax) {
            shift = scaler.col_min(c);
            scale = scaler.col_max(c) - scaler.col_min(c);
        } else {
            shift = scaler.col_mean(c);
            scale = scaler.col_std(c);
        }
        if (scale > 0.0) {
            out.col(c) = (columns.col(c).array() - shift) / scale;
        } else {
            out.col(c).setZero();     // constant column carries no signal
        }
    }
    return out;
}

Eigen::MatrixXd apply_scaler(const Scaler& scaler, const WeeklySeries& series) {
    return apply_scaler(scaler, input_matrix(series));
}

WindowSet make_supervised(const Eigen::MatrixXd& scaled, const std::vector<double>& price,
                          int window) {
    if (window < 1) {
        throw std::invalid_argument("make_supervised: window must be at least 1");
    }
    if (std::size_t(scaled.rows()) != price.size()) {
        throw std::invalid_argument("make_supervised: row count mismatch");
    }
    const std::size_t total = price.size();
    if (total < std::size_t(window) + 1) {
        throw std::invalid_argument("make_supervised: series shorter than window + 1");
    }
    WindowSet ws;
    ws.window = window;
    const std::size_t count = total - std::size_t(window);
    ws.inputs.reserve(count);
    ws.targets.resize(Eigen::Index(count));
    ws.target_rows.reserve(count);
    std::size_t k = 0;
    for (std::size_t t = std::size_t(window) - 1; t + 1 < total; ++t, ++k) {
        ws.inputs.push_back(scaled.middleRows(Eigen::Index(t + 1 - std::size_t(window)), window));
        ws.targets(Eigen::Index(k)) = price[t + 1] - price[t];
        ws.target_rows.push_back(t + 1);
    }
    return ws;
}

SeriesTensor make_tensor(const WeeklySeries& full, const Scaler& scaler, Date train_end,
                         Date valid_end) {
    SeriesTensor tensor;
    tensor.scaled = apply_scaler(scaler, full);
    tensor.price.reserve(full.size());
    tensor.week_start.reserve(full.size());
    for (const auto& row : full.rows) {
        tensor.price.push_back(row.avg_price);
        tensor.week_start.push_back(row.week_start);
    }
    tensor.valid_begin = tensor.week_start.size();
    tensor.test_begin = tensor.week_start.size();
    for (std::size_t i = 0; i < tensor.week_start.size(); ++i) {
        if (tensor.week_start[i] > train_end) {
            tensor.valid_begin = i;
            break;
        }
    }
    for (std::size_t i = tensor.valid_begin; i < tensor.week_start.size(); ++i) {
        if (tensor.week_start[i] > valid_end) {
            tensor.test_begin = i;
            break;
        }
    }
    return tensor;
}

std::array<WindowSet, 3> split_windows(const WindowSet& all, std::size_t valid_begin,
                                       std::size_t test_begin) {
    if (test_begin < valid_begin) {
        throw std::invalid_argument("split_windows: test_begin before valid_begin");
    }
    std::array<WindowSet, 3> parts;
    for (auto& p : parts) {
        p.window = all.window;
    }
    std::array<std::vector<double>, 3> targets;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const std::size_t row = all.target_rows[i];
        const std::size_t part = row < valid_begin ? 0 : row < test_begin ? 1 : 2;
        parts[part].inputs.push_back(all.inputs[i]);
        parts[part].target_rows.push_back(row);
        targets[part].push_back(all.targets(Eigen::Index(i)));
    }
    for (std::size_t p = 0; p < 3; ++p) {
        parts[p].targets = Eigen::Map<const Eigen::VectorXd>(targets[p].data(),
                                                             Eigen::Index(targets[p].size()));
    }
    return parts;
}

void save_weekly_csv(const WeeklySeries& series, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "week_start,quantity,customers,orders,on_sale,cost,week_cos,week_sin,"
           "price_std,avg_price,interpolated\n";
    for (const auto& r : series.rows) {
        out << format_date(r.week_start) << ',' << io::format_double(r.quantity) << ','
            << io::format_double(r.customers) << ',' << io::format_double(r.orders) << ','
            << io::format_double(r.on_sale) << ',' << io::format_double(r.cost) << ','
            << io::format_double(r.week_cos) << ',' << io::format_double(r.week_sin) << ','
            << io::format_double(r.price_std) << ',' << io::format_double(r.avg_price) << ','
            << (r.interpolated ? '1' : '0') << '\n';
    }
    io::write_atomic(path, out.str());
}

WeeklySeries load_weekly_csv(const std::filesystem::path& path) {
    std::istringstream in(io::read_file(path));
    std::string line;
    WeeklySeries series;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line_no == 1) {
            continue;     // header
        }
        const auto fields = io::split_line(line, ',');
        if (fields.size() != 11) {
            throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                                     ": expected 11 fields");
        }
        WeeklyRow r;
        r.week_start = parse_date(fields[0]);
        r.quantity = io::parse_double(fields[1]);
        r.customers = io::parse_double(fields[2]);
        r.orders = io::parse_double(fields[3]);
        r.on_sale = io::parse_double(fields[4]);
        r.cost = io::parse_double(fields[5]);
        r.week_cos = io::parse_double(fields[6]);
        r.week_sin = io::parse_double(fields[7]);
        r.price_std = io::parse_double(fields[8]);
        r.avg_price = io::parse_double(fields[9]);
        r.interpolated = fields[10] == "1";
        series.rows.push_back(r);
    }
    return series;
}

}
