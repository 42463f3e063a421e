#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lapselab::text {

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Fixed notation with `digits` decimals; used for report tables.
std::string format_fixed(double v, int digits);

/// "NA" for nullopt.
std::string format_optional(const std::optional<double>& v);

std::vector<std::string_view> split(std::string_view line, char sep);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

std::string_view trim(std::string_view s);

}  // namespace lapselab::text
