#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rovtl::text {

// Shortest representation that parses back to the same double.
std::string format_double(double v);
// Whole-string parse; throws with `where` in the message on failure or
// non-finite input.
double parse_double(std::string_view text, std::string_view where);
long long parse_integer(std::string_view text, std::string_view where);
std::vector<std::string> split(const std::string& line, char sep);
std::string trim(std::string_view s);
std::string join(const std::vector<std::string>& parts, char sep);

}  // namespace rovtl::text
