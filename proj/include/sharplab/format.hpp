#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sharplab {

/// Shortest-exact text for a double: 17 significant digits, "nan"/"inf" spelled out.
std::string format_real(double x);

/// Inverse of format_real. Throws ConfigError on malformed input.
double parse_real(std::string_view text);

std::vector<std::string> split(std::string_view line, char sep);

}  // namespace sharplab
