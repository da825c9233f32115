// SPDX-License-Identifier: Apache-2.0
#include "scs/vtime.hpp"

#include "scs/error.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace scs {

namespace {

bool parse_int(std::string_view text, int& out)
{
    if (text.empty())
        return false;
    for (char c: text)
        if (c < '0' || c > '9')
            return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc {} && ptr == text.data() + text.size();
}

[[noreturn]] void bad(std::string_view text)
{
    schema_violation("malformed timestamp '" + std::string(text) + "'", {"timestamp"});
}

}  // namespace

Date parse_date(std::string_view text)
{
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        bad(text);
    int y = 0, m = 0, d = 0;
    if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) || !parse_int(text.substr(8, 2), d))
        bad(text);
    auto ymd = std::chrono::year {y} / std::chrono::month {static_cast<unsigned>(m)} / std::chrono::day {static_cast<unsigned>(d)};
    if (!ymd.ok())
        bad(text);
    return Date {ymd};
}

Timestamp parse_timestamp(std::string_view text)
{
    if (text.size() == 10)
        return Timestamp {parse_date(text)};
    if (text.size() != 16 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':')
        bad(text);
    auto day = parse_date(text.substr(0, 10));
    int hh = 0, mm = 0;
    if (!parse_int(text.substr(11, 2), hh) || !parse_int(text.substr(14, 2), mm) || hh > 23 || mm > 59)
        bad(text);
    return at(day, hh, mm);
}

std::string format_date(Date d)
{
    std::chrono::year_month_day ymd {d};
    std::array<char, 16> buf {};
    std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf.data();
}

std::string format_time_of_day(Timestamp ts)
{
    auto minutes = (ts - Timestamp {date_of(ts)}).count();
    std::array<char, 8> buf {};
    std::snprintf(buf.data(), buf.size(), "%02d:%02d", static_cast<int>(minutes / 60), static_cast<int>(minutes % 60));
    return buf.data();
}

std::string format_timestamp(Timestamp ts)
{
    return format_date(date_of(ts)) + "T" + format_time_of_day(ts);
}

Date date_of(Timestamp ts)
{
    return std::chrono::floor<std::chrono::days>(ts);
}

Timestamp at(Date d, int hour, int minute)
{
    return Timestamp {d} + std::chrono::hours {hour} + std::chrono::minutes {minute};
}

bool is_working_day(Date d)
{
    auto wd = std::chrono::weekday {d};
    return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

Date next_working_day(Date d)
{
    do {
        d += std::chrono::days {1};
    } while (!is_working_day(d));
    return d;
}

Date first_working_day_from(Date d)
{
    while (!is_working_day(d))
        d += std::chrono::days {1};
    return d;
}

std::string_view weekday_name(Date d)
{
    static constexpr std::array<std::string_view, 7> names {"Sunday",   "Monday", "Tuesday", "Wednesday",
                                                            "Thursday", "Friday", "Saturday"};
    return names[std::chrono::weekday {d}.c_encoding()];
}

bool is_monday(Date d)
{
    return std::chrono::weekday {d} == std::chrono::Monday;
}

}  // namespace scs
