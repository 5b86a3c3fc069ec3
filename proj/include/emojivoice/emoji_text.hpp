#pragma once

// Emoji-annotated script parsing.
//
// A phrase is the unit of synthesis. Each phrase may carry one style emoji,
// the emoji trailing the phrase text; every other emoji is stripped from the
// speakable text. Emoji detection follows the emoji sequence grammar of
// Unicode TR51 against property tables pinned to kUnicodeVersion:
//
//   cluster  := RI RI | RI | keycap | element (ZWJ element')*
//   keycap   := [0-9#*] FE0F? 20E3
//   element  := (Pict | Modifier | Text-default-pict &> (FE0F|Modifier))
//               (FE0F | Modifier)* (Tag+ CancelTag)?
//   element' := same, but a text-default pictograph needs no selector
//
// Pict is Extended_Pictographic with Emoji_Presentation; text-default
// pictographs (©, ™, ☺ ...) only count as emoji when a selector or modifier
// follows, or when they continue a ZWJ sequence.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace emojivoice {

inline constexpr std::string_view kUnicodeVersion = "14.0";

struct ByteRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

struct EmojiToken {
  std::vector<char32_t> codepoints;
  ByteRange byte_range;

  std::string utf8() const;
  // Codepoints with U+FE0F removed; two tokens that differ only in
  // presentation selectors share a key.
  std::u32string key() const;

  friend bool operator==(const EmojiToken&, const EmojiToken&) = default;
};

struct AnnotatedPhrase {
  std::string clean_text;
  std::optional<EmojiToken> style_emoji;
  std::optional<std::string> speaker_label;
  int source_line = 0;  // 1-based

  friend bool operator==(const AnnotatedPhrase&, const AnnotatedPhrase&) = default;
};

struct Script {
  std::vector<AnnotatedPhrase> phrases;
  std::optional<std::string> source_path;
};

struct TrailingEmoji {
  std::string clean_text;
  std::optional<EmojiToken> emoji;
};

// All maximal emoji clusters, left to right. Byte ranges index into text.
// Throws DecodeError on invalid UTF-8.
std::vector<EmojiToken> scan_emoji(std::string_view text);

// Parses text that must consist of exactly one emoji cluster (surrounding
// whitespace allowed). Throws PreconditionError otherwise.
EmojiToken parse_single_emoji(std::string_view text);

// Splits on newlines and on . ! ? … (outside emoji clusters). Emojis,
// whitespace, closing quotes and further terminators that follow a
// terminator stay with the phrase they close. Lines starting with '#' are
// comments; a leading "Name:" sets the speaker label for the whole line.
Script segment_phrases(std::string_view text);

// The last non-whitespace cluster, ignoring terminal punctuation, selects
// the style when it is an emoji. clean_text has every emoji removed and
// whitespace normalized.
TrailingEmoji extract_trailing_emoji(std::string_view phrase_text);

// Reads and segments a UTF-8 script file. Throws IoError.
Script load_script(const std::filesystem::path& path);

// Removes all emoji clusters and normalizes whitespace.
std::string strip_emoji(std::string_view text);

}  // namespace emojivoice
