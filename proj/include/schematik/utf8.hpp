#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace schematik::utf8 {

/// Decodes UTF-8; malformed bytes become U+FFFD.
std::u32string decode(std::string_view s);
std::string encode(std::u32string_view s);
std::string encode(char32_t c);
bool is_valid(std::string_view s);

/// Splits on Unicode whitespace, dropping empty tokens.
std::vector<std::string> split_words(std::string_view s);

}  // namespace schematik::utf8
