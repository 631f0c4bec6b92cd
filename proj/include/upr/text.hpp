#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace upr {

/// Maximal runs of non-whitespace characters, in order.
std::vector<std::string_view> whitespace_words(std::string_view text);

/// Retrieval analyzer: ASCII lowercase, split on anything that is not an
/// ASCII letter or digit. Bytes >= 0x80 count as word characters so UTF-8
/// letters stay inside their word.
std::vector<std::string> analyze(std::string_view text);

std::string ascii_lower(std::string_view text);

std::string join(const std::vector<std::string_view>& words, std::string_view sep);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a whole field as a double / non-negative integer.
bool parse_double(std::string_view field, double& out);
bool parse_size(std::string_view field, std::size_t& out);

std::vector<std::string_view> split_char(std::string_view text, char sep);

}  // namespace upr
