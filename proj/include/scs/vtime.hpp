// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <string>
#include <string_view>

// Virtual calendar shared by planning, materialization and simulation. Virtual
// time never touches the wall clock; everything is minute precision UTC-naive.
namespace scs {

using Date = std::chrono::sys_days;
using Timestamp = std::chrono::sys_time<std::chrono::minutes>;

/// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM" and "YYYY-MM-DD HH:MM".
/// Throws Error(SchemaViolation) on anything else.
Timestamp parse_timestamp(std::string_view text);
Date parse_date(std::string_view text);

/// ISO-8601 minutes, "YYYY-MM-DDTHH:MM".
std::string format_timestamp(Timestamp ts);
std::string format_date(Date d);
/// "HH:MM"
std::string format_time_of_day(Timestamp ts);

Date date_of(Timestamp ts);
Timestamp at(Date d, int hour, int minute = 0);

bool is_working_day(Date d);
Date next_working_day(Date d);
/// Working day on or after `d`.
Date first_working_day_from(Date d);
std::string_view weekday_name(Date d);
bool is_monday(Date d);

}  // namespace scs
