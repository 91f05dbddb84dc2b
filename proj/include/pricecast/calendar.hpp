#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace pricecast {

/// Calendar dates are carried as std::chrono::sys_days. Day counts relative
/// to the Unix epoch provide the numeric time axis used by the trend models.
using Date = std::chrono::sys_days;

/// Parses a strict ISO-8601 calendar date (YYYY-MM-DD). Anything else,
/// including out-of-range components such as 2020-02-30, throws
/// std::invalid_argument.
Date parse_date(std::string_view text);

/// Formats a date back to YYYY-MM-DD.
std::string format_date(Date d);

/// Days elapsed since 1970-01-01 (negative before the epoch).
long days_since_epoch(Date d);

Date from_days_since_epoch(long days);

/// The Monday on or before the given date. Weeks run Monday through Sunday.
Date monday_of_week(Date d);

/// ISO-8601 week number (1..53) of the week containing the given date.
int iso_week_number(Date d);

/// Zero-based week-of-year index (ISO week number minus one, so 0..52) used
/// by the cyclic time embedding.
int embedding_week(Date d);

}
