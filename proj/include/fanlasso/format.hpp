#pragma once

#include <string>

namespace fanlasso {

// Shortest decimal string that parses back to exactly the same double.
// Keeps CSV and JSON output byte-stable across runs.
std::string format_double(double value);

}  // namespace fanlasso
