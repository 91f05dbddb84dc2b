#include "pricecast/calendar.hpp"

#include <charconv>
#include <stdexcept>

namespace pricecast {

namespace {

int parse_component(std::string_view text, std::size_t begin, std::size_t len) {
    int value = 0;
    const char* first = text.data() + begin;
    auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc{} || ptr != first + len) {
        throw std::invalid_argument("bad date: " + std::string(text));
    }
    return value;
}

}

Date parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw std::invalid_argument("bad date: " + std::string(text));
    }
    const int y = parse_component(text, 0, 4);
    const int m = parse_component(text, 5, 2);
    const int d = parse_component(text, 8, 2);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                          std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) {
        throw std::invalid_argument("bad date: " + std::string(text));
    }
    return Date{ymd};
}

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[11];
    const int y = int(ymd.year());
    const unsigned m = unsigned(ymd.month());
    const unsigned day = unsigned(ymd.day());
    buf[0] = char('0' + y / 1000 % 10);
    buf[1] = char('0' + y / 100 % 10);
    buf[2] = char('0' + y / 10 % 10);
    buf[3] = char('0' + y % 10);
    buf[4] = '-';
    buf[5] = char('0' + m / 10);
    buf[6] = char('0' + m % 10);
    buf[7] = '-';
    buf[8] = char('0' + day / 10);
    buf[9] = char('0' + day % 10);
    buf[10] = '\0';
    return std::string(buf);
}

long days_since_epoch(Date d) {
    return d.time_since_epoch().count();
}

Date from_days_since_epoch(long days) {
    return Date{std::chrono::days{days}};
}

Date monday_of_week(Date d) {
    const std::chrono::weekday wd{d};
    return d - std::chrono::days{wd.iso_encoding() - 1};
}

int iso_week_number(Date d) {
    // ISO week number: week 1 is the one containing the first Thursday of
    // the year, equivalently the Thursday of the current week decides the
    // owning year.
    const Date thursday = monday_of_week(d) + std::chrono::days{3};
    const std::chrono::year_month_day ymd{thursday};
    const Date jan1{std::chrono::year_month_day{ymd.year(), std::chrono::month{1}, std::chrono::day{1}}};
    return int((days_since_epoch(thursday) - days_since_epoch(jan1)) / 7) + 1;
}

int embedding_week(Date d) {
    return iso_week_number(d) - 1;
}

}
