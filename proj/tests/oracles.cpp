#include "oracles.hpp"

#include <random>
#include <regex>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

namespace oracle {
namespace {

char class_letter(char32_t cp) {
  auto c = static_cast<UChar32>(cp);
  if (cp == 0xFE0F) return 'V';
  if (cp == 0x200D) return 'Z';
  if (cp == 0x20E3) return 'E';
  if ((cp >= '0' && cp <= '9') || cp == '#' || cp == '*') return 'K';
  if (cp >= 0xE0020 && cp <= 0xE007E) return 'T';
  if (cp == 0xE007F) return 'C';
  if (u_hasBinaryProperty(c, UCHAR_REGIONAL_INDICATOR)) return 'R';
  if (u_hasBinaryProperty(c, UCHAR_EMOJI_MODIFIER)) return 'M';
  if (u_hasBinaryProperty(c, UCHAR_EXTENDED_PICTOGRAPHIC))
    return u_hasBinaryProperty(c, UCHAR_EMOJI_PRESENTATION) ? 'P' : 'X';
  return 'o';
}

const std::regex& cluster_regex() {
  static const std::regex re("RR?|KV?E|(?:P[VM]*|X[VM]+|M[VM]*)(?:T+C)?(?:Z[PXM][VM]*(?:T+C)?)*");
  return re;
}

}  // namespace

std::string encode_utf8(char32_t cp) {
  char buf[4];
  int32_t len = 0;
  UBool err = false;
  U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, 4, static_cast<UChar32>(cp), err);
  if (err) return {};
  return std::string(buf, static_cast<std::size_t>(len));
}

std::vector<EmojiSpan> scan_emoji(const std::string& text) {
  std::vector<char32_t> cps;
  std::vector<std::size_t> offsets;
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  int32_t i = 0;
  const auto n = static_cast<int32_t>(text.size());
  while (i < n) {
    offsets.push_back(static_cast<std::size_t>(i));
    UChar32 c;
    U8_NEXT(s, i, n, c);
    cps.push_back(static_cast<char32_t>(c));
  }
  offsets.push_back(text.size());

  std::string letters;
  for (char32_t cp : cps) letters.push_back(class_letter(cp));

  std::vector<EmojiSpan> out;
  std::size_t pos = 0;
  while (pos < letters.size()) {
    std::smatch m;
    auto begin = letters.cbegin() + static_cast<std::ptrdiff_t>(pos);
    if (std::regex_search(begin, letters.cend(), m, cluster_regex(), std::regex_constants::match_continuous) &&
        m.length(0) > 0) {
      std::size_t len = static_cast<std::size_t>(m.length(0));
      EmojiSpan span;
      span.codepoints.assign(cps.begin() + static_cast<std::ptrdiff_t>(pos),
                             cps.begin() + static_cast<std::ptrdiff_t>(pos + len));
      span.byte_begin = offsets[pos];
      span.byte_end = offsets[pos + len];
      out.push_back(std::move(span));
      pos += len;
    } else {
      ++pos;
    }
  }
  return out;
}

std::vector<std::string> emoji_fuzz_corpus(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  // Every Extended_Pictographic scalar in the BMP and SMP planes.
  static const std::vector<char32_t> pictographs = [] {
    std::vector<char32_t> v;
    for (char32_t cp = 0; cp < 0x20000; ++cp)
      if (u_hasBinaryProperty(static_cast<UChar32>(cp), UCHAR_EXTENDED_PICTOGRAPHIC)) v.push_back(cp);
    return v;
  }();

  const std::vector<std::u32string> sequences = {
      U"\U0001F469‍\U0001F4BB",                 // woman technologist
      U"\U0001F468\U0001F3FD‍\U0001F373",       // cook, medium skin tone
      U"\U0001F3F3️‍\U0001F308",           // rainbow flag
      U"\U0001F1E8\U0001F1E6",                       // flag CA
      U"1️⃣",                              // keycap 1
      U"#⃣",
      U"\U0001F3F4\U000E0067\U000E0062\U000E0073\U000E0063\U000E0074\U000E007F",  // flag Scotland
      U"\U0001F44D\U0001F3FD",
      U"❤️",
      U"☺",                                     // text-default, no selector
      U"☝\U0001F3FB",                           // text-default with modifier
      U"\U0001F642",
      U"\U0001F468‍\U0001F469‍\U0001F467‍\U0001F466",
      U"‍",                                     // stray joiner
      U"\U0001F3FB",                                 // lone modifier
      U"\U0001F1FA",                                 // lone regional indicator
      U"\U000E0067\U000E007F",                       // stray tags
  };
  const std::u32string ascii = U"abcdefghijklmnopqrstuvwxyz ABCXYZ0123456789.,!?:;'\"()#* -";
  const std::u32string cjk = U"你好世界日本語。、！";
  const std::u32string misc = U"éñüЖא…’”»　 ";
  const std::u32string glue = U"️‍⃣\U0001F3FB\U0001F3FF\U0001F1E6\U0001F1FF\U000E0041\U000E007F";

  std::vector<std::string> corpus;
  corpus.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    std::u32string s;
    std::size_t pieces = 1 + pick(24);
    for (std::size_t p = 0; p < pieces; ++p) {
      switch (pick(8)) {
        case 0: case 1: s += ascii[pick(ascii.size())]; break;
        case 2: s += cjk[pick(cjk.size())]; break;
        case 3: s += misc[pick(misc.size())]; break;
        case 4: s += pictographs[pick(pictographs.size())]; break;
        case 5: s += sequences[pick(sequences.size())]; break;
        case 6: s += glue[pick(glue.size())]; break;
        default: s += U' '; break;
      }
    }
    std::string utf8;
    for (char32_t cp : s) utf8 += encode_utf8(cp);
    corpus.push_back(std::move(utf8));
  }
  return corpus;
}

std::vector<FuzzReply> reply_fuzz_corpus(std::size_t count, std::uint64_t seed,
                                         const std::vector<std::string>& emoji_pool) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  const std::vector<std::string> words = {"once", "the", "dragon", "slept", "under", "a", "hill", "and",
                                          "nobody", "knew", "why", "it", "sang", "so", "loudly", "then"};
  const std::vector<std::string> closers = {".", "!", "?", "...", "…", ")", "\"", "!\"", ""};

  std::vector<FuzzReply> out;
  for (std::size_t n = 0; n < count; ++n) {
    // Pieces: 'w' word, 'e' emoji, 'p' closing punctuation.
    std::vector<std::pair<char, std::string>> pieces;
    std::size_t nwords = 1 + pick(10);
    for (std::size_t i = 0; i < nwords; ++i) pieces.emplace_back('w', words[pick(words.size())]);
    std::size_t nemoji = pick(6);
    for (std::size_t e = 0; e < nemoji; ++e) {
      std::size_t at = pick(pieces.size() + 1);
      pieces.insert(pieces.begin() + static_cast<std::ptrdiff_t>(at), {'e', emoji_pool[pick(emoji_pool.size())]});
    }
    if (pick(2) == 0) pieces.emplace_back('p', closers[pick(closers.size())]);

    FuzzReply r;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      bool tight = pieces[i].first == 'p' || (pieces[i].first == 'e' && pick(3) == 0);
      if (i > 0 && !tight) r.text += pick(4) == 0 ? "  " : " ";
      r.text += pieces[i].second;
    }
    if (pick(5) == 0) r.text += " ";
    for (auto it = pieces.rbegin(); it != pieces.rend(); ++it) {
      if (it->first == 'p') continue;
      if (it->first == 'e') {
        r.trailing = true;
        r.trailing_emoji = it->second;
      }
      break;
    }
    out.push_back(std::move(r));
  }
  return out;
}

TempDir::TempDir() {
  static std::mt19937_64 rng(std::random_device{}());
  path_ = std::filesystem::temp_directory_path() / ("emojivoice_test_" + std::to_string(rng()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace oracle
