#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace retina::service {

/// Seconds since the Unix epoch, UTC.
using Clock = std::function<std::int64_t()>;

Clock system_clock();
/// Always returns `t`.
Clock frozen_clock(std::int64_t t);

/// "YYYY-MM-DD HH:MM:SS".
std::string format_timestamp(std::int64_t t);
/// "YYYY-MM-DD".
std::string format_date(std::int64_t day);

/// Days since 1970-01-01 of a "YYYY-MM-DD" calendar date.
std::optional<std::int64_t> parse_date(std::string_view text);
/// "YYYY-MM-DD HH:MM:SS", "YYYY-MM-DDTHH:MM:SS" or the same with a
/// trailing "Z"; always UTC.
std::optional<std::int64_t> parse_timestamp(std::string_view text);

inline std::int64_t day_of(std::int64_t t) { return (t >= 0 ? t : t - 86399) / 86400; }

}  // namespace retina::service
