#pragma once

#include "pricecast/calendar.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pricecast::ingest {

/// One order line from the wholesale export. Monetary amounts are euros.
struct OrderRecord {
    Date date;
    std::string order_number;
    double unit_price = 0.0;
    std::string article_code;
    long long quantity = 0;
    std::string customer_code;
    bool on_offer = false;
    std::optional<std::string> offer_type;
    double unit_cost = 0.0;
};

/// Quantity-weighted location and spread of the unit prices in a batch of
/// orders. total_weight is the summed quantity behind the estimate.
struct WeightedStats {
    double mean = 0.0;
    double stddev = 0.0;
    long long total_weight = 0;
};

/**
 * @brief Reads an orders CSV from a stream.
 *
 * Expected columns, in order: date, order_number, unit_price, article_code,
 * quantity, customer_code, on_offer, offer_type, unit_cost. A header row is
 * detected by a non-date first field and skipped. Dates must be YYYY-MM-DD,
 * decimals must use '.', on_offer must be 0/1, and offer_type may be empty.
 * Any malformed row aborts the parse with the 1-based line number in the
 * exception message.
 */
std::vector<OrderRecord> parse_orders(std::istream& source, char delimiter = ',');

std::vector<OrderRecord> parse_orders_file(const std::string& path, char delimiter = ',');

/// Keeps orders for one article up to and including the cutoff date.
/// Relative order of the survivors is unchanged.
std::vector<OrderRecord> restrict_orders(const std::vector<OrderRecord>& records,
                                         const std::string& article_code, Date cutoff);

/// Quantity-weighted mean and standard deviation of unit_price. The variance
/// is the weighted mean squared deviation (no Bessel correction). Orders
/// with non-positive quantity contribute nothing; if every quantity is zero
/// the orders are weighted equally instead.
WeightedStats weighted_price_stats(const std::vector<OrderRecord>& records);

/// Drops orders whose unit price sits more than `threshold` weighted
/// standard deviations from the weighted mean. The stats are computed once
/// on the input, not recomputed after removals. A zero spread keeps
/// everything (every z-score is treated as 0).
std::vector<OrderRecord> zscore_filter(const std::vector<OrderRecord>& records,
                                       const WeightedStats& stats, double threshold = 4.0);

}
