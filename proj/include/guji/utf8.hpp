#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace guji {

// Strict UTF-8 decode to Unicode scalar values. Throws DataError on malformed
// input (truncated sequences, overlong encodings, surrogates, > U+10FFFF).
std::vector<char32_t> utf8_decode(std::string_view s);

// Number of Unicode scalar values in s.
size_t utf8_length(std::string_view s);

void utf8_append(std::string& out, char32_t cp);
std::string utf8_encode(std::span<const char32_t> cps);
std::string utf8_encode_one(char32_t cp);

} // namespace guji
