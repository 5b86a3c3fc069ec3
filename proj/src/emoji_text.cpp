#include "emojivoice/emoji_text.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <span>

#include "emojivoice/error.hpp"
#include "emojivoice/utf8.hpp"

namespace emojivoice {

namespace {

struct CodepointRange {
  char32_t first;
  char32_t last;
};

#include "emoji_tables.inc"

static_assert(kUnicodeMajor == 14 && kUnicodeMinor == 0,
              "kUnicodeVersion must match the generated tables");

template <std::size_t N>
bool in_table(const CodepointRange (&table)[N], char32_t cp) {
  const auto* it = std::upper_bound(
      std::begin(table), std::end(table), cp,
      [](char32_t value, const CodepointRange& r) { return value < r.first; });
  if (it == std::begin(table)) return false;
  --it;
  return cp <= it->last;
}

enum class Cls : unsigned char {
  Other,
  Pict,          // Extended_Pictographic + Emoji_Presentation
  PictText,      // Extended_Pictographic, text presentation by default
  Modifier,      // U+1F3FB..U+1F3FF
  Vs16,          // U+FE0F
  Zwj,           // U+200D
  KeycapBase,    // [0-9#*]
  Keycap,        // U+20E3
  Regional,      // U+1F1E6..U+1F1FF
  TagSpec,       // U+E0020..U+E007E
  TagCancel,     // U+E007F
};

Cls classify(char32_t cp) {
  if (cp < 0x80) {
    if ((cp >= '0' && cp <= '9') || cp == '#' || cp == '*') return Cls::KeycapBase;
    return Cls::Other;
  }
  if (cp == 0xFE0F) return Cls::Vs16;
  if (cp == 0x200D) return Cls::Zwj;
  if (cp == 0x20E3) return Cls::Keycap;
  if (cp >= 0x1F3FB && cp <= 0x1F3FF) return Cls::Modifier;
  if (cp >= 0x1F1E6 && cp <= 0x1F1FF) return Cls::Regional;
  if (cp >= 0xE0020 && cp <= 0xE007E) return Cls::TagSpec;
  if (cp == 0xE007F) return Cls::TagCancel;
  if (in_table(kExtendedPictographic, cp)) {
    return in_table(kEmojiPresentation, cp) ? Cls::Pict : Cls::PictText;
  }
  return Cls::Other;
}

class ClusterMatcher {
 public:
  explicit ClusterMatcher(std::span<const utf8::DecodedScalar> scalars) {
    classes_.reserve(scalars.size());
    for (const auto& s : scalars) classes_.push_back(classify(s.value));
  }

  // End index of the cluster starting at i, or i when none starts there.
  std::size_t match(std::size_t i) const {
    switch (at(i)) {
      case Cls::Regional:
        return at(i + 1) == Cls::Regional ? i + 2 : i + 1;
      case Cls::KeycapBase: {
        std::size_t j = i + 1;
        if (at(j) == Cls::Vs16) ++j;
        return at(j) == Cls::Keycap ? j + 1 : i;
      }
      default:
        break;
    }
    std::size_t j = element(i, false);
    if (j == i) return i;
    while (at(j) == Cls::Zwj) {
      const std::size_t k = element(j + 1, true);
      if (k == j + 1) break;
      j = k;
    }
    return j;
  }

 private:
  Cls at(std::size_t i) const { return i < classes_.size() ? classes_[i] : Cls::Other; }

  static bool is_selector(Cls c) { return c == Cls::Vs16 || c == Cls::Modifier; }

  std::size_t element(std::size_t i, bool after_zwj) const {
    const Cls c = at(i);
    const bool base = c == Cls::Pict || c == Cls::Modifier ||
                      (c == Cls::PictText && (after_zwj || is_selector(at(i + 1))));
    if (!base) return i;
    std::size_t j = i + 1;
    while (is_selector(at(j))) ++j;
    std::size_t k = j;
    while (at(k) == Cls::TagSpec) ++k;
    if (k > j && at(k) == Cls::TagCancel) j = k + 1;
    return j;
  }

  std::vector<Cls> classes_;
};

// Half-open scalar index span of one emoji cluster.
struct ClusterSpan {
  std::size_t first;
  std::size_t last;
};

std::vector<ClusterSpan> find_clusters(std::span<const utf8::DecodedScalar> scalars) {
  std::vector<ClusterSpan> out;
  ClusterMatcher matcher(scalars);
  std::size_t i = 0;
  while (i < scalars.size()) {
    const std::size_t end = matcher.match(i);
    if (end > i) {
      out.push_back({i, end});
      i = end;
    } else {
      ++i;
    }
  }
  return out;
}

// Decoded offsets are relative to the decoded string, so tokens built from a
// sub-span still index into the full text.
EmojiToken make_token(std::span<const utf8::DecodedScalar> scalars, ClusterSpan span) {
  EmojiToken tok;
  for (std::size_t i = span.first; i < span.last; ++i) tok.codepoints.push_back(scalars[i].value);
  const auto& last = scalars[span.last - 1];
  tok.byte_range = {scalars[span.first].offset, last.offset + last.length};
  return tok;
}

bool is_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_terminator(char32_t cp) {
  return cp == '.' || cp == '!' || cp == '?' || cp == 0x2026;
}

bool is_closer(char32_t cp) {
  switch (cp) {
    case '"': case '\'': case ')': case ']': case '}':
    case 0x2019: case 0x201D: case 0xBB:
      return true;
    default:
      return false;
  }
}

// Punctuation an emoji may precede in the source without a space in between.
bool is_closing_punct(char32_t cp) {
  return is_terminator(cp) || is_closer(cp) || cp == ',' || cp == ';' || cp == ':';
}

// A decoded slice with its emoji clusters, the working form of a phrase.
struct Units {
  std::span<const utf8::DecodedScalar> scalars;
  std::vector<ClusterSpan> clusters;
};

std::string clean_units(const Units& u) {
  // Pieces: text scalars, whitespace, emoji markers. Runs of whitespace and
  // markers collapse to one space; a run that held an emoji and precedes
  // closing punctuation disappears; runs at either end are trimmed.
  std::string out;
  bool pending = false;
  bool pending_marker = false;
  std::size_t ci = 0;
  std::size_t i = 0;
  const auto& s = u.scalars;
  while (i < s.size()) {
    if (ci < u.clusters.size() && u.clusters[ci].first == i) {
      pending = true;
      pending_marker = true;
      i = u.clusters[ci].last;
      ++ci;
      continue;
    }
    const char32_t cp = s[i].value;
    if (is_space(cp)) {
      pending = true;
      ++i;
      continue;
    }
    if (pending && !out.empty() && !(pending_marker && is_closing_punct(cp))) {
      out.push_back(' ');
    }
    pending = false;
    pending_marker = false;
    utf8::append(out, cp);
    ++i;
  }
  return out;
}

TrailingEmoji extract_units(const Units& u) {
  TrailingEmoji result;
  result.clean_text = clean_units(u);

  // Walk back over whitespace and terminal punctuation; the first
  // significant unit is either an emoji cluster or ordinary text.
  std::size_t i = u.scalars.size();
  std::size_t ci = u.clusters.size();
  while (i > 0) {
    if (ci > 0 && u.clusters[ci - 1].last == i) {
      result.emoji = make_token(u.scalars, u.clusters[ci - 1]);
      break;
    }
    const char32_t cp = u.scalars[i - 1].value;
    if (is_space(cp) || is_closing_punct(cp)) {
      --i;
      continue;
    }
    break;
  }
  return result;
}

Units make_units(std::span<const utf8::DecodedScalar> scalars) {
  return Units{scalars, find_clusters(scalars)};
}

// Matches `[A-Za-z][A-Za-z0-9 ]* ':'` at the start of the line, allowing
// leading whitespace. Returns the scalar index just past the colon.
std::optional<std::pair<std::string, std::size_t>> speaker_label(
    std::span<const utf8::DecodedScalar> line) {
  constexpr std::size_t kMaxLabel = 32;
  std::size_t i = 0;
  while (i < line.size() && is_space(line[i].value)) ++i;
  const std::size_t start = i;
  auto alpha = [](char32_t c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); };
  auto digit = [](char32_t c) { return c >= '0' && c <= '9'; };
  if (i >= line.size() || !alpha(line[i].value)) return std::nullopt;
  std::string label;
  while (i < line.size() && (alpha(line[i].value) || digit(line[i].value) || line[i].value == ' ')) {
    label.push_back(static_cast<char>(line[i].value));
    ++i;
  }
  if (i >= line.size() || line[i].value != ':' || i - start > kMaxLabel) return std::nullopt;
  while (!label.empty() && label.back() == ' ') label.pop_back();
  return std::make_pair(std::move(label), i + 1);
}

void segment_line(std::span<const utf8::DecodedScalar> line, int line_no, Script& script) {
  std::optional<std::string> speaker;
  std::size_t begin = 0;
  if (auto label = speaker_label(line)) {
    speaker = std::move(label->first);
    begin = label->second;
  }
  const auto body = line.subspan(begin);
  const auto clusters = find_clusters(body);

  auto emit = [&](std::size_t first, std::size_t last) {
    if (first >= last) return;
    const auto slice = body.subspan(first, last - first);
    Units units{slice, {}};
    for (const auto& c : clusters) {
      if (c.first >= first && c.last <= last) units.clusters.push_back({c.first - first, c.last - first});
    }
    auto extracted = extract_units(units);
    if (extracted.clean_text.empty()) return;
    script.phrases.push_back(AnnotatedPhrase{std::move(extracted.clean_text),
                                             std::move(extracted.emoji), speaker, line_no});
  };

  std::size_t phrase_start = 0;
  bool in_tail = false;
  std::size_t ci = 0;
  std::size_t i = 0;
  while (i < body.size()) {
    const bool at_cluster = ci < clusters.size() && clusters[ci].first == i;
    const char32_t cp = body[i].value;
    if (in_tail && !at_cluster && !is_space(cp) && !is_terminator(cp) && !is_closer(cp)) {
      emit(phrase_start, i);
      phrase_start = i;
      in_tail = false;
    }
    if (at_cluster) {
      i = clusters[ci].last;
      ++ci;
      continue;
    }
    if (is_terminator(cp)) in_tail = true;
    ++i;
  }
  emit(phrase_start, body.size());
}

}  // namespace

std::string EmojiToken::utf8() const { return utf8::encode(codepoints); }

std::u32string EmojiToken::key() const {
  std::u32string out;
  for (char32_t cp : codepoints) {
    if (cp != 0xFE0F) out.push_back(cp);
  }
  return out;
}

std::vector<EmojiToken> scan_emoji(std::string_view text) {
  const auto scalars = utf8::decode(text);
  std::vector<EmojiToken> out;
  for (const auto& span : find_clusters(scalars)) out.push_back(make_token(scalars, span));
  return out;
}

EmojiToken parse_single_emoji(std::string_view text) {
  const auto scalars = utf8::decode(text);
  const auto clusters = find_clusters(scalars);
  if (clusters.size() != 1) {
    throw PreconditionError("expected exactly one emoji in \"" + std::string(text) + "\"");
  }
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if ((i < clusters[0].first || i >= clusters[0].last) && !is_space(scalars[i].value)) {
      throw PreconditionError("unexpected text around emoji in \"" + std::string(text) + "\"");
    }
  }
  return make_token(scalars, clusters[0]);
}

TrailingEmoji extract_trailing_emoji(std::string_view phrase_text) {
  const auto scalars = utf8::decode(phrase_text);
  return extract_units(make_units(scalars));
}

std::string strip_emoji(std::string_view text) {
  const auto scalars = utf8::decode(text);
  return clean_units(make_units(scalars));
}

Script segment_phrases(std::string_view text) {
  const auto scalars = utf8::decode(text);
  Script script;
  std::span<const utf8::DecodedScalar> all(scalars);
  std::size_t line_start = 0;
  int line_no = 1;
  for (std::size_t i = 0; i <= all.size(); ++i) {
    if (i < all.size() && all[i].value != '\n') continue;
    auto line = all.subspan(line_start, i - line_start);
    if (!line.empty() && line.back().value == '\r') line = line.first(line.size() - 1);
    if (line.empty() || line.front().value != '#') segment_line(line, line_no, script);
    line_start = i + 1;
    ++line_no;
  }
  return script;
}

Script load_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open script");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path.string(), "read failed");
  Script script = segment_phrases(text);
  script.source_path = path.string();
  return script;
}

}  // namespace emojivoice
