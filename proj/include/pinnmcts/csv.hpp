#pragma once

#include <string>
#include <vector>

// Minimal CSV helpers: comma separated, no quoting.
namespace pinnmcts::csv {

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& line, char sep = ',');
bool parse_double(const std::string& text, double& out);
// Shortest round-trip decimal representation; '.' separator regardless of locale.
std::string fmt(double x);

}  // namespace pinnmcts::csv
