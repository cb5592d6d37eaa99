#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace tsrp {

/// Wall-clock time at the plant, treated as a naive calendar time (no DST).
using TimePoint = std::chrono::sys_seconds;

inline constexpr std::chrono::seconds kSampleStep{300};

/// Accepts "YYYY-MM-DDTHH:MM[:SS]" with 'T' or ' ' as separator.
std::optional<TimePoint> parse_timestamp(std::string_view text);
/// "YYYY-MM-DDTHH:MM:SS"
std::string format_timestamp(TimePoint t);

}  // namespace tsrp
