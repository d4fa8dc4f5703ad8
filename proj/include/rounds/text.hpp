#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the parser, simulator, and judges. All
// case folding is ASCII-only; bytes >= 0x80 pass through untouched.
namespace rounds::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool starts_with_icase(std::string_view s, std::string_view prefix);

// Collapses every run of ASCII whitespace to one space and trims.
std::string collapse_whitespace(std::string_view s);

// Lowercase, ASCII punctuation replaced by spaces, whitespace collapsed.
std::string normalize_loose(std::string_view s);

// Lowercase and drop every ASCII non-alphanumeric byte ("Yes." -> "yes").
std::string alnum_only_lower(std::string_view s);

std::vector<std::string> split_words(std::string_view normalized);

// Case-insensitive containment after whitespace collapsing.
bool contains_icase_ws(std::string_view haystack, std::string_view needle);

std::vector<std::string> split_lines(std::string_view s);

}  // namespace rounds::text
