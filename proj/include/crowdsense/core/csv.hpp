#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace crowdsense::csv {

/// Splits one delimiter-separated line. Double-quoted fields may contain the
/// delimiter; `""` inside quotes is a literal quote. Trailing CR is dropped.
std::vector<std::string> split(std::string_view line, char delimiter = ',');

/// Quotes the field only when it contains the delimiter, a quote or a newline.
std::string escape(std::string_view field, char delimiter = ',');

std::string trim(std::string_view s);
std::string lower(std::string_view s);

} // namespace crowdsense::csv
