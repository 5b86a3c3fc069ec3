#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace emojivoice::utf8 {

struct DecodedScalar {
  char32_t value;
  std::size_t offset;  // byte offset of the first code unit
  std::size_t length;  // number of code units (1..4)
};

// Decodes the whole string. Throws DecodeError naming the first bad offset.
// Rejects overlong forms, surrogates and values above U+10FFFF.
std::vector<DecodedScalar> decode(std::string_view text);

void append(std::string& out, char32_t cp);
std::string encode(const std::vector<char32_t>& cps);

bool is_valid(std::string_view text) noexcept;

}  // namespace emojivoice::utf8
