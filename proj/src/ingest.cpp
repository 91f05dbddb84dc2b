#include "pricecast/ingest.hpp"

#include "pricecast/io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <stdexcept>

namespace pricecast::ingest {

namespace {

constexpr std::size_t kColumnCount = 9;

bool looks_like_date(const std::string& field) {
    try {
        parse_date(field);
        return true;
    } catch (const std::invalid_argument&) {
        return false;
    }
}

OrderRecord parse_row(const std::vector<std::string>& fields, std::size_t line_no) {
    if (fields.size() != kColumnCount) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(kColumnCount) + " fields, got " +
                                 std::to_string(fields.size()));
    }
    try {
        OrderRecord rec;
        rec.date = parse_date(io::trim(fields[0]));
        rec.order_number = io::trim(fields[1]);
        rec.unit_price = io::parse_double(io::trim(fields[2]));
        rec.article_code = io::trim(fields[3]);
        rec.quantity = io::parse_int(io::trim(fields[4]));
        rec.customer_code = io::trim(fields[5]);
        const std::string offer_flag = io::trim(fields[6]);
        if (offer_flag == "0") {
            rec.on_offer = false;
        } else if (offer_flag == "1") {
            rec.on_offer = true;
        } else {
            throw std::invalid_argument("on_offer must be 0 or 1, got '" + offer_flag + "'");
        }
        const std::string offer_type = io::trim(fields[7]);
        if (!offer_type.empty()) {
            rec.offer_type = offer_type;
        }
        rec.unit_cost = io::parse_double(io::trim(fields[8]));
        return rec;
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
}

}

std::vector<OrderRecord> parse_orders(std::istream& source, char delimiter) {
    std::vector<OrderRecord> records;
    std::string line;
    std::size_t line_no = 0;
    bool first_content_line = true;
    while (std::getline(source, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (io::trim(line).empty()) {
            continue;
        }
        auto fields = io::split_line(line, delimiter);
        if (first_content_line) {
            first_content_line = false;
            if (!looks_like_date(io::trim(fields[0]))) {
                continue;     // header row
            }
        }
        records.push_back(parse_row(fields, line_no));
    }
    return records;
}

std::vector<OrderRecord> parse_orders_file(const std::string& path, char delimiter) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return parse_orders(in, delimiter);
}

std::vector<OrderRecord> restrict_orders(const std::vector<OrderRecord>& records,
                                         const std::string& article_code, Date cutoff) {
    std::vector<OrderRecord> kept;
    for (const auto& rec : records) {
        if (rec.article_code == article_code && rec.date <= cutoff) {
            kept.push_back(rec);
        }
    }
    return kept;
}

WeightedStats weighted_price_stats(const std::vector<OrderRecord>& records) {
    if (records.empty()) {
        throw std::invalid_argument("weighted_price_stats: no orders");
    }
    double weight_sum = 0.0;
    long long total_weight = 0;
    for (const auto& rec : records) {
        if (rec.quantity > 0) {
            weight_sum += double(rec.quantity);
            total_weight += rec.quantity;
        }
    }
    // All-zero quantities would leave the estimate undefined, so fall back
    // to unweighted statistics in that case.
    const bool unweighted = weight_sum <= 0.0;
    if (unweighted) {
        weight_sum = double(records.size());
    }
    auto weight_of = [&](const OrderRecord& rec) {
        if (unweighted) {
            return 1.0;
        }
        return rec.quantity > 0 ? double(rec.quantity) : 0.0;
    };
    double mean = 0.0;
    for (const auto& rec : records) {
        mean += weight_of(rec) * rec.unit_price;
    }
    mean /= weight_sum;
    double var = 0.0;
    for (const auto& rec : records) {
        const double d = rec.unit_price - mean;
        var += weight_of(rec) * d * d;
    }
    var /= weight_sum;
    WeightedStats stats;
    stats.mean = mean;
    stats.stddev = std::sqrt(var);
    stats.total_weight = total_weight;
    return stats;
}

std::vector<OrderRecord> zscore_filter(const std::vector<OrderRecord>& records,
                                       const WeightedStats& stats, double threshold) {
    if (threshold <= 0.0) {
        throw std::invalid_argument("zscore_filter: threshold must be positive");
    }
    std::vector<OrderRecord> kept;
    kept.reserve(records.size());
    for (const auto& rec : records) {
        const double z = stats.stddev > 0.0 ? (rec.unit_price - stats.mean) / stats.stddev : 0.0;
        if (std::fabs(z) <= threshold) {
            kept.push_back(rec);
        }
    }
    return kept;
}

}
