// Regenerates src/emoji_tables.inc from the ICU property database.
//
//   gen_emoji_tables > src/emoji_tables.inc
//
// The checked-in tables are pinned to the Unicode version printed in the
// header comment; rerun only when deliberately moving to a new version.

#include <unicode/uchar.h>
#include <unicode/uversion.h>

#include <cstdio>
#include <vector>

namespace {

struct Range {
  UChar32 first;
  UChar32 last;
};

std::vector<Range> collect(UProperty prop) {
  std::vector<Range> out;
  for (UChar32 c = 0; c <= 0x10FFFF; ++c) {
    if (!u_hasBinaryProperty(c, prop)) continue;
    if (!out.empty() && out.back().last == c - 1) {
      out.back().last = c;
    } else {
      out.push_back({c, c});
    }
  }
  return out;
}

void emit(const char* name, const std::vector<Range>& ranges) {
  std::printf("inline constexpr CodepointRange %s[] = {\n", name);
  for (const auto& r : ranges) {
    std::printf("    {0x%04X, 0x%04X},\n", static_cast<unsigned>(r.first),
                static_cast<unsigned>(r.last));
  }
  std::printf("};\n\n");
}

}  // namespace

int main() {
  UVersionInfo v;
  u_getUnicodeVersion(v);
  std::printf("// Generated by tools/gen_emoji_tables.cpp. Do not edit.\n");
  std::printf("// Unicode %d.%d.%d\n\n", v[0], v[1], v[2]);
  std::printf("inline constexpr int kUnicodeMajor = %d;\n", v[0]);
  std::printf("inline constexpr int kUnicodeMinor = %d;\n\n", v[1]);
  emit("kExtendedPictographic", collect(UCHAR_EXTENDED_PICTOGRAPHIC));
  emit("kEmojiPresentation", collect(UCHAR_EMOJI_PRESENTATION));
  return 0;
}
