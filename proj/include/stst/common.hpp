#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stst {

// Error taxonomy. The CLI maps these onto exit codes, everything else just
// propagates them.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Tensor/matrix dimension mismatch.
class ShapeError : public Error {
  public:
    using Error::Error;
};

// Bad data or violated invariant (malformed CSV, non-monotonic dates, ...).
class ValueError : public Error {
  public:
    using Error::Error;
};

// Misuse of the CLI or configuration (unknown key, missing argument).
class UsageError : public Error {
  public:
    using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
  public:
    using Error::Error;
};

// Calendar date (proleptic Gregorian). Comparison is lexicographic on
// (year, month, day), which matches chronological order.
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    auto operator<=>(const Date&) const = default;

    bool ok() const {
        return std::chrono::year_month_day{std::chrono::year{year},
                                           std::chrono::month{unsigned(month)},
                                           std::chrono::day{unsigned(day)}}
            .ok();
    }

    // ISO weekday: Monday=1 .. Sunday=7.
    int iso_weekday() const {
        using namespace std::chrono;
        sys_days sd{year_month_day{std::chrono::year{year}, std::chrono::month{unsigned(month)},
                                   std::chrono::day{unsigned(day)}}};
        return int(weekday{sd}.iso_encoding());
    }

    // Days since the civil epoch; differences give calendar-day spans.
    long serial() const {
        using namespace std::chrono;
        sys_days sd{year_month_day{std::chrono::year{year}, std::chrono::month{unsigned(month)},
                                   std::chrono::day{unsigned(day)}}};
        return sd.time_since_epoch().count();
    }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    // Parses strict ISO-8601 "YYYY-MM-DD"; throws ValueError otherwise.
    static Date parse(std::string_view text);
};

inline long days_between(const Date& from, const Date& to) {
    return to.serial() - from.serial();
}

// Round-trip-exact decimal rendering of a double.
std::string fnum(double v);

}  // namespace stst
