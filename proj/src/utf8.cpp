#include "emojivoice/utf8.hpp"

#include "emojivoice/error.hpp"

namespace emojivoice::utf8 {

namespace {

// Returns the scalar length at text[pos], or 0 with reason set on failure.
std::size_t decode_one(std::string_view text, std::size_t pos, char32_t& cp,
                       const char*& reason) noexcept {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  std::size_t len = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
    min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
    min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
    min = 0x10000;
  } else {
    reason = "invalid lead byte";
    return 0;
  }
  if (pos + len > text.size()) {
    reason = "truncated sequence";
    return 0;
  }
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(text[pos + i]);
    if ((b & 0xC0) != 0x80) {
      reason = "invalid continuation byte";
      return 0;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min) {
    reason = "overlong encoding";
    return 0;
  }
  if (cp >= 0xD800 && cp <= 0xDFFF) {
    reason = "surrogate code point";
    return 0;
  }
  if (cp > 0x10FFFF) {
    reason = "code point above U+10FFFF";
    return 0;
  }
  return len;
}

}  // namespace

std::vector<DecodedScalar> decode(std::string_view text) {
  std::vector<DecodedScalar> out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp = 0;
    const char* reason = "";
    const std::size_t len = decode_one(text, pos, cp, reason);
    if (len == 0) throw DecodeError(pos, reason);
    out.push_back({cp, pos, len});
    pos += len;
  }
  return out;
}

bool is_valid(std::string_view text) noexcept {
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp = 0;
    const char* reason = "";
    const std::size_t len = decode_one(text, pos, cp, reason);
    if (len == 0) return false;
    pos += len;
  }
  return true;
}

void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode(const std::vector<char32_t>& cps) {
  std::string out;
  for (char32_t cp : cps) append(out, cp);
  return out;
}

}  // namespace emojivoice::utf8
