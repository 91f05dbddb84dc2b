#pragma once

#include "pricecast/calendar.hpp"
#include "pricecast/rng.hpp"
#include "pricecast/weekly.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace testsupport {

/// Fresh empty directory under the test runner's working directory.
/// Recreated on every call so stale files from a previous run cannot leak
/// into assertions.
inline std::filesystem::path scratch_dir(const std::string& name) {
    std::filesystem::path dir = std::filesystem::path("test_tmp") / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline pricecast::Date monday(int year, unsigned month, unsigned day) {
    using namespace std::chrono;
    return sys_days(std::chrono::year(year) / std::chrono::month(month) / std::chrono::day(day));
}

/// Weekly series on consecutive Mondays with the given average prices.
/// The non-price fields get small fixed values so scalers have something
/// to chew on.
inline pricecast::weekly::WeeklySeries weekly_from_prices(const std::vector<double>& prices,
                                                          pricecast::Date start) {
    pricecast::weekly::WeeklySeries out;
    for (std::size_t i = 0; i < prices.size(); ++i) {
        pricecast::weekly::WeeklyRow row;
        row.week_start = start + std::chrono::days(7 * long(i));
        row.quantity = 10.0 + double(i % 5);
        row.customers = 2.0 + double(i % 3);
        row.orders = 3.0 + double(i % 4);
        row.on_sale = double(i % 2);
        row.cost = 0.75 * prices[i];
        const auto [c, s] = pricecast::weekly::time_embedding(
            pricecast::embedding_week(row.week_start));
        row.week_cos = c;
        row.week_sin = s;
        row.price_std = 0.01;
        row.avg_price = prices[i];
        out.rows.push_back(row);
    }
    return out;
}

/// Central finite-difference gradient of a scalar function of a flat
/// parameter vector, for checking analytic gradients.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double step = 1e-5) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe(i) = x(i) + step;
        const double up = f(probe);
        probe(i) = x(i) - step;
        const double down = f(probe);
        probe(i) = x(i);
        g(i) = (up - down) / (2.0 * step);
    }
    return g;
}

/// Largest relative discrepancy between two gradients, with an absolute
/// floor so near-zero components do not blow the ratio up.
inline double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                            double floor = 1e-6) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a(i)), std::abs(b(i)), floor});
        worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
    }
    return worst;
}

}
