#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace scr {

// UTC, second precision.
using Timestamp = std::chrono::sys_seconds;

// "2024-03-31T17:05:00Z". Also accepts a bare date ("2024-03-31").
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);
// "2024-03-31"
std::string format_date(Timestamp t);
Timestamp now_utc();

}  // namespace scr
