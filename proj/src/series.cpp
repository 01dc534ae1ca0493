#include "loadmix/series.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace loadmix {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian civil date.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);              // [0, 399]
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;   // [0, 365]
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;             // [0, 146096]
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);           // [0, 146096]
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);           // [0, 365]
    const unsigned mp = (5 * doy + 2) / 153;                                // [0, 11]
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

int parse_fixed_int(std::string_view text, std::size_t pos, std::size_t len) {
    int value = 0;
    const char* first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc{} || ptr != first + len) {
        throw std::invalid_argument("timestamp: expected digits at position " +
                                    std::to_string(pos));
    }
    return value;
}

constexpr int kDaysInMonth[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};

bool is_leap(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

}  // namespace

std::int64_t parse_timestamp(std::string_view text) {
    if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
    // YYYY-MM-DDTHH:MM:SS
    if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
        text[13] != ':' || text[16] != ':') {
        throw std::invalid_argument("timestamp: expected YYYY-MM-DDTHH:MM:SS, got \"" +
                                    std::string(text) + "\"");
    }
    const int year = parse_fixed_int(text, 0, 4);
    const int month = parse_fixed_int(text, 5, 2);
    const int day = parse_fixed_int(text, 8, 2);
    const int hour = parse_fixed_int(text, 11, 2);
    const int minute = parse_fixed_int(text, 14, 2);
    const int second = parse_fixed_int(text, 17, 2);

    if (month < 1 || month > 12)
        throw std::invalid_argument("timestamp: month out of range");
    int month_days = kDaysInMonth[month - 1];
    if (month == 2 && is_leap(year)) month_days = 29;
    if (day < 1 || day > month_days)
        throw std::invalid_argument("timestamp: day out of range");
    if (hour > 23 || minute > 59 || second > 59)
        throw std::invalid_argument("timestamp: time of day out of range");

    return days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(std::int64_t epoch_seconds) {
    std::int64_t days = epoch_seconds / 86400;
    std::int64_t rem = epoch_seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d", y, m, d,
                  static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                  static_cast<int>(rem % 60));
    return buf;
}

double total_energy_kwh(const LoadSeries& series) {
    double sum = 0.0;
    for (double v : series.values_kw) sum += v;
    return sum * series.step_minutes / 60.0;
}

}  // namespace loadmix
