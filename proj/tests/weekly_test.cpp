#include "pricecast/weekly.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace pricecast;
using testsupport::monday;
using testsupport::weekly_from_prices;

namespace {

ingest::OrderRecord order(const std::string& date, double price, long long quantity,
                          const std::string& customer, bool on_offer = false,
                          double cost = 1.0) {
    ingest::OrderRecord r;
    r.date = parse_date(date);
    r.order_number = "SO";
    r.unit_price = price;
    r.article_code = "100001";
    r.quantity = quantity;
    r.customer_code = customer;
    r.on_offer = on_offer;
    if (on_offer) {
        r.offer_type = "PROMO";
    }
    r.unit_cost = cost;
    return r;
}

}

TEST_CASE("time_embedding matches the cyclic formula at reference weeks") {
    const auto [c0, s0] = weekly::time_embedding(0);
    CHECK(c0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s0 == doctest::Approx(0.0).epsilon(1e-12));

    const auto [c13, s13] = weekly::time_embedding(13);
    CHECK(c13 == doctest::Approx(0.00430482581157).epsilon(1e-9));
    CHECK(s13 == doctest::Approx(0.999990734194).epsilon(1e-9));

    const auto [c26, s26] = weekly::time_embedding(26);
    CHECK(c26 == doctest::Approx(-0.999962936949).epsilon(1e-9));
    CHECK(s26 == doctest::Approx(0.00860957184778).epsilon(1e-9));

    const auto [c51, s51] = weekly::time_embedding(51);
    CHECK(c51 == doctest::Approx(0.990531758715).epsilon(1e-9));
    CHECK(s51 == doctest::Approx(-0.137283775359).epsilon(1e-9));

    // Week 52 must land close to week 0: that is the point of the 52.1429
    // denominator.
    const auto [c52, s52] = weekly::time_embedding(52);
    CHECK(std::hypot(c52 - 1.0, s52 - 0.0) < 0.02);
}

TEST_CASE("resample_weekly aggregates one ISO week of orders") {
    std::vector<ingest::OrderRecord> batch{
        order("2020-03-09", 1.40, 10, "C1"),
        order("2020-03-11", 1.60, 10, "C2", true),
        order("2020-03-13", 1.50, 5, "C1"),
    };
    const auto series = weekly::resample_weekly(batch);
    REQUIRE(series.size() == 1);
    const auto& row = series.rows[0];
    CHECK(row.week_start == monday(2020, 3, 9));
    CHECK(row.orders == doctest::Approx(3.0));
    CHECK(row.customers == doctest::Approx(2.0));
    CHECK(row.on_sale == doctest::Approx(1.0));
    CHECK(row.quantity == doctest::Approx(25.0));
    CHECK_FALSE(row.interpolated);

    const auto [c, s] = weekly::time_embedding(embedding_week(row.week_start));
    CHECK(row.week_cos == doctest::Approx(c));
    CHECK(row.week_sin == doctest::Approx(s));
}

TEST_CASE("weekly price statistics are quantity weighted") {
    std::vector<ingest::OrderRecord> batch{
        order("2020-03-09", 1.40, 10, "C1"),
        order("2020-03-10", 1.60, 10, "C2"),
    };
    const auto series = weekly::resample_weekly(batch);
    REQUIRE(series.size() == 1);
    CHECK(series.rows[0].avg_price == doctest::Approx(1.50).epsilon(1e-12));
    CHECK(series.rows[0].price_std == doctest::Approx(0.10).epsilon(1e-12));

    const auto single = weekly::resample_weekly({order("2020-03-09", 2.0, 7, "C1")});
    CHECK(single.rows[0].price_std == doctest::Approx(0.0));
}

TEST_CASE("resample_weekly splits orders across week boundaries and sorts") {
    std::vector<ingest::OrderRecord> batch{
        order("2020-03-16", 2.0, 1, "C1"),
        order("2020-03-09", 1.0, 1, "C1"),
        order("2020-03-15", 1.2, 1, "C2"),
    };
    const auto series = weekly::resample_weekly(batch);
    REQUIRE(series.size() == 2);
    CHECK(series.rows[0].week_start == monday(2020, 3, 9));
    CHECK(series.rows[1].week_start == monday(2020, 3, 16));
    CHECK(series.rows[0].orders == doctest::Approx(2.0));
}

TEST_CASE("trim_leading_gap drops history before the last oversized gap") {
    // Weeks 0, then 1..4 missing gives a 4-week hole (tolerable), then a
    // 5-week hole before the final stretch.
    weekly::WeeklySeries series;
    const Date start = monday(2018, 1, 1);
    for (const int w : {0, 5, 11, 12, 13}) {
        weekly::WeeklyRow row;
        row.week_start = start + std::chrono::days(7 * w);
        row.avg_price = 1.0 + w;
        series.rows.push_back(row);
    }

    const auto trimmed = weekly::trim_leading_gap(series, 4);
    REQUIRE(trimmed.size() == 3);
    CHECK(trimmed.rows[0].week_start == start + std::chrono::days(7 * 11));

    // A gap of exactly gap_max missing weeks survives.
    weekly::WeeklySeries tolerable;
    for (const int w : {0, 5, 6}) {
        weekly::WeeklyRow row;
        row.week_start = start + std::chrono::days(7 * w);
        tolerable.rows.push_back(row);
    }
    CHECK(weekly::trim_leading_gap(tolerable, 4).size() == 3);
    CHECK_THROWS_AS(weekly::trim_leading_gap(series, 0), std::invalid_argument);
}

TEST_CASE("fill_gaps interpolates the continuous fields and flags the rows") {
    const Date start = monday(2018, 1, 1);
    weekly::WeeklySeries series;
    {
        weekly::WeeklyRow a;
        a.week_start = start;
        a.cost = 1.0;
        a.price_std = 0.2;
        a.avg_price = 1.0;
        a.orders = 3;
        a.quantity = 10;
        series.rows.push_back(a);
        weekly::WeeklyRow b = a;
        b.week_start = start + std::chrono::days(14);
        b.cost = 3.0;
        b.price_std = 0.4;
        b.avg_price = 3.0;
        series.rows.push_back(b);
    }

    const auto filled = weekly::fill_gaps(series, 4);
    REQUIRE(filled.size() == 3);
    const auto& mid = filled.rows[1];
    CHECK(mid.week_start == start + std::chrono::days(7));
    CHECK(mid.interpolated);
    CHECK(mid.avg_price == doctest::Approx(2.0));
    CHECK(mid.cost == doctest::Approx(2.0));
    CHECK(mid.price_std == doctest::Approx(0.3));
    CHECK(mid.orders == doctest::Approx(0.0));
    CHECK(mid.quantity == doctest::Approx(0.0));
    CHECK(mid.customers == doctest::Approx(0.0));
    CHECK(mid.on_sale == doctest::Approx(0.0));

    const auto [c, s] = weekly::time_embedding(embedding_week(mid.week_start));
    CHECK(mid.week_cos == doctest::Approx(c));
    CHECK(mid.week_sin == doctest::Approx(s));
    CHECK_FALSE(filled.rows[0].interpolated);
    CHECK_FALSE(filled.rows[2].interpolated);
}

TEST_CASE("fill_gaps interpolates two missing weeks linearly") {
    const Date start = monday(2018, 1, 1);
    weekly::WeeklySeries series;
    weekly::WeeklyRow a;
    a.week_start = start;
    a.avg_price = 1.0;
    series.rows.push_back(a);
    weekly::WeeklyRow b;
    b.week_start = start + std::chrono::days(21);
    b.avg_price = 4.0;
    series.rows.push_back(b);

    const auto filled = weekly::fill_gaps(series, 4);
    REQUIRE(filled.size() == 4);
    CHECK(filled.rows[1].avg_price == doctest::Approx(2.0));
    CHECK(filled.rows[2].avg_price == doctest::Approx(3.0));
}

TEST_CASE("fill_gaps refuses oversized holes") {
    const Date start = monday(2018, 1, 1);
    weekly::WeeklySeries series;
    weekly::WeeklyRow a;
    a.week_start = start;
    series.rows.push_back(a);
    weekly::WeeklyRow b;
    b.week_start = start + std::chrono::days(7 * 6);    // five missing weeks
    series.rows.push_back(b);
    CHECK_THROWS(weekly::fill_gaps(series, 4));
    CHECK(weekly::fill_gaps(series, 5).size() == 7);
}

TEST_CASE("split_series cuts at inclusive boundaries in order") {
    const auto series = weekly_from_prices({1, 2, 3, 4, 5, 6}, monday(2020, 1, 6));
    const Date train_end = monday(2020, 1, 20);
    const Date valid_end = monday(2020, 2, 3);
    const auto split = weekly::split_series(series, train_end, valid_end);
    CHECK(split.train.size() == 3);
    CHECK(split.valid.size() == 2);
    CHECK(split.test.size() == 1);
    CHECK(split.train.rows.back().week_start == train_end);
    CHECK(split.valid.rows.back().week_start == valid_end);
    CHECK_THROWS_AS(weekly::split_series(series, valid_end, train_end), std::invalid_argument);
}

TEST_CASE("input_matrix lays the nine features out in field order") {
    const auto series = weekly_from_prices({2.0}, monday(2020, 1, 6));
    const Eigen::MatrixXd m = weekly::input_matrix(series);
    REQUIRE(m.rows() == 1);
    REQUIRE(m.cols() == 9);
    const auto& r = series.rows[0];
    CHECK(m(0, 0) == doctest::Approx(r.quantity));
    CHECK(m(0, 1) == doctest::Approx(r.customers));
    CHECK(m(0, 2) == doctest::Approx(r.orders));
    CHECK(m(0, 3) == doctest::Approx(r.on_sale));
    CHECK(m(0, 4) == doctest::Approx(r.cost));
    CHECK(m(0, 5) == doctest::Approx(r.week_cos));
    CHECK(m(0, 6) == doctest::Approx(r.week_sin));
    CHECK(m(0, 7) == doctest::Approx(r.price_std));
    CHECK(m(0, 8) == doctest::Approx(r.avg_price));
}

TEST_CASE("min-max scaler fits on training rows only") {
    auto train = weekly_from_prices({1.0, 2.0, 3.0}, monday(2020, 1, 6));
    const auto scaler = weekly::fit_scaler(train, weekly::ScalerKind::MinMax);
    const Eigen::MatrixXd scaled = weekly::apply_scaler(scaler, train);
    const int price_col = 8;
    CHECK(scaled(0, price_col) == doctest::Approx(0.0));
    CHECK(scaled(1, price_col) == doctest::Approx(0.5));
    CHECK(scaled(2, price_col) == doctest::Approx(1.0));

    // Later rows reuse the training parameters, so they can leave [0, 1].
    auto test = weekly_from_prices({4.0}, monday(2020, 1, 27));
    const Eigen::MatrixXd out = weekly::apply_scaler(scaler, test);
    CHECK(out(0, price_col) == doctest::Approx(1.5));
}

TEST_CASE("constant columns scale to zero in both modes") {
    auto train = weekly_from_prices({2.0, 2.0, 2.0}, monday(2020, 1, 6));
    for (auto& row : train.rows) {
        row.quantity = 7.0;
        row.customers = 7.0;
        row.orders = 7.0;
        row.on_sale = 7.0;
        row.cost = 7.0;
        row.price_std = 7.0;
    }
    for (const auto kind : {weekly::ScalerKind::MinMax, weekly::ScalerKind::ZScore}) {
        const auto scaler = weekly::fit_scaler(train, kind);
        const Eigen::MatrixXd scaled = weekly::apply_scaler(scaler, train);
        CHECK(scaled.col(8).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
        CHECK(scaled.col(0).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    }
}

TEST_CASE("z-score scaler centres and normalises the training columns") {
    auto train = weekly_from_prices({1.0, 2.0, 3.0}, monday(2020, 1, 6));
    const auto scaler = weekly::fit_scaler(train, weekly::ScalerKind::ZScore);
    const Eigen::MatrixXd scaled = weekly::apply_scaler(scaler, train);
    CHECK(scaled.col(8).mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(scaled(2, 8) == -scaled(0, 8));
    CHECK(scaled(1, 8) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("make_supervised windows cover n weeks and target the next change") {
    SUBCASE("six rows and a four week window give two samples") {
        const std::vector<double> prices{1.0, 1.1, 1.2, 1.3, 1.4, 1.6};
        Eigen::MatrixXd scaled = Eigen::MatrixXd::Random(6, 9);
        const auto set = weekly::make_supervised(scaled, prices, 4);
        REQUIRE(set.size() == 2);
        CHECK(set.window == 4);
        CHECK(set.inputs[0].rows() == 4);
        CHECK(set.inputs[0].cols() == 9);
        // Window t = 3 covers rows 0..3; its target is price[4] - price[3].
        CHECK(set.inputs[0] == scaled.topRows(4));
        CHECK(set.targets(0) == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(set.targets(1) == doctest::Approx(0.2).epsilon(1e-9));
        CHECK(set.target_rows[0] == 4);
        CHECK(set.target_rows[1] == 5);
        CHECK(set.size() == prices.size() - 4);
    }
    SUBCASE("window one on two rows") {
        const std::vector<double> prices{1.41, 1.55};
        Eigen::MatrixXd scaled = Eigen::MatrixXd::Zero(2, 9);
        const auto set = weekly::make_supervised(scaled, prices, 1);
        REQUIRE(set.size() == 1);
        CHECK(set.targets(0) == doctest::Approx(0.14).epsilon(1e-12));
        CHECK(set.target_rows[0] == 1);
    }
    SUBCASE("window of the full series length leaves nothing to predict") {
        const std::vector<double> prices{1.0, 2.0};
        Eigen::MatrixXd scaled = Eigen::MatrixXd::Zero(2, 9);
        CHECK_THROWS(weekly::make_supervised(scaled, prices, 2));
        CHECK_THROWS(weekly::make_supervised(scaled, prices, 0));
    }
}

TEST_CASE("targets stay in euros even though inputs are scaled") {
    auto series = weekly_from_prices({10.0, 10.5, 11.0, 11.5, 12.0, 13.0}, monday(2020, 1, 6));
    const auto scaler = weekly::fit_scaler(series, weekly::ScalerKind::MinMax);
    const Eigen::MatrixXd scaled = weekly::apply_scaler(scaler, series);
    std::vector<double> prices;
    for (const auto& row : series.rows) {
        prices.push_back(row.avg_price);
    }
    const auto set = weekly::make_supervised(scaled, prices, 4);
    REQUIRE(set.size() == 2);
    CHECK(set.targets(0) == doctest::Approx(0.5));
    CHECK(set.targets(1) == doctest::Approx(1.0));
}

TEST_CASE("make_tensor and split_windows agree on partition boundaries") {
    const std::vector<double> prices{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    auto series = weekly_from_prices(prices, monday(2020, 1, 6));
    const Date train_end = series.rows[5].week_start;
    const Date valid_end = series.rows[7].week_start;

    const auto split = weekly::split_series(series, train_end, valid_end);
    const auto scaler = weekly::fit_scaler(split.train, weekly::ScalerKind::MinMax);
    const auto tensor = weekly::make_tensor(series, scaler, train_end, valid_end);
    CHECK(tensor.valid_begin == 6);
    CHECK(tensor.test_begin == 8);
    CHECK(tensor.scaled.rows() == 10);
    CHECK(tensor.price.size() == 10);
    CHECK(tensor.week_start.front() == series.rows.front().week_start);

    const auto all = weekly::make_supervised(tensor.scaled, tensor.price, 4);
    const auto parts = weekly::split_windows(all, tensor.valid_begin, tensor.test_begin);
    // Targets 4 and 5 train, 6 and 7 validate, 8 and 9 test.
    CHECK(parts[0].size() == 2);
    CHECK(parts[1].size() == 2);
    CHECK(parts[2].size() == 2);
    CHECK(parts[0].target_rows.front() == 4);
    CHECK(parts[1].target_rows.front() == 6);
    CHECK(parts[2].target_rows.front() == 8);
    CHECK(parts[0].window == 4);
    for (const auto& part : parts) {
        CHECK(part.inputs.size() == std::size_t(part.targets.size()));
        CHECK(part.inputs.size() == part.target_rows.size());
    }
}

TEST_CASE("weekly csv round-trips every field") {
    const auto dir = testsupport::scratch_dir("weekly_csv");
    auto series = weekly_from_prices({1.25, 2.5, 3.75}, monday(2020, 1, 6));
    series.rows[1].interpolated = true;
    const auto path = dir / "weekly.csv";
    weekly::save_weekly_csv(series, path);
    const auto back = weekly::load_weekly_csv(path);
    REQUIRE(back.size() == series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& a = series.rows[i];
        const auto& b = back.rows[i];
        CHECK(a.week_start == b.week_start);
        CHECK(a.quantity == b.quantity);
        CHECK(a.customers == b.customers);
        CHECK(a.orders == b.orders);
        CHECK(a.on_sale == b.on_sale);
        CHECK(a.cost == b.cost);
        CHECK(a.week_cos == b.week_cos);
        CHECK(a.week_sin == b.week_sin);
        CHECK(a.price_std == b.price_std);
        CHECK(a.avg_price == b.avg_price);
        CHECK(a.interpolated == b.interpolated);
    }
}
