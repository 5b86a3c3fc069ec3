#include <gtest/gtest.h>

#include "emojivoice/error.hpp"
#include "emojivoice/utf8.hpp"
#include "oracles.hpp"

using namespace emojivoice;

TEST(Utf8, RoundTripsAllScalarClasses) {
  std::vector<char32_t> cps = {0x41, 0xE9, 0x20AC, 0x1F642, 0x10FFFF, 0};
  std::string s = utf8::encode(cps);
  auto decoded = utf8::decode(s);
  ASSERT_EQ(decoded.size(), cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    EXPECT_EQ(decoded[i].value, cps[i]);
    EXPECT_EQ(s.substr(decoded[i].offset, decoded[i].length), oracle::encode_utf8(cps[i]));
  }
}

TEST(Utf8, RejectsMalformedInput) {
  struct Case {
    std::string bytes;
    std::size_t offset;
  };
  const std::vector<Case> cases = {
      {"a\x80", 1},                 // stray continuation
      {"ab\xC0\xAF", 2},            // overlong '/'
      {"\xE0\x80\xAF", 0},          // overlong, three bytes
      {"x\xED\xA0\x80", 1},         // surrogate
      {"\xF4\x90\x80\x80", 0},      // above U+10FFFF
      {"ok\xE2\x82", 2},            // truncated
      {"\xF8\x88\x80\x80\x80", 0},  // five-byte form
  };
  for (const auto& c : cases) {
    EXPECT_FALSE(utf8::is_valid(c.bytes));
    try {
      utf8::decode(c.bytes);
      ADD_FAILURE() << "accepted invalid input";
    } catch (const DecodeError& e) {
      EXPECT_EQ(e.offset(), c.offset);
    }
  }
}
