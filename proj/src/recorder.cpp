#include "emojivoice/recorder.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "emojivoice/audio.hpp"
#include "emojivoice/error.hpp"
#include "emojivoice/fs_util.hpp"

namespace emojivoice {

namespace fs = std::filesystem;

std::vector<SessionEmoji> emoji_set_from(const StyleRegistry& registry) {
  std::vector<SessionEmoji> out;
  for (const auto& s : registry.styles()) out.push_back({s.emoji.utf8(), s.style_id});
  return out;
}

std::string PromptSession::display_text(std::size_t emoji_index, std::size_t prompt_index) const {
  const auto& emoji = emoji_set.at(emoji_index).emoji;
  return prompts.at(emoji).at(prompt_index) + " " + emoji;
}

std::size_t PromptSession::total_prompts() const {
  std::size_t n = 0;
  for (const auto& e : emoji_set) {
    if (auto it = prompts.find(e.emoji); it != prompts.end()) n += it->second.size();
  }
  return n;
}

std::size_t PromptSession::emoji_index(std::string_view emoji) const {
  const auto key = parse_single_emoji(emoji).key();
  for (std::size_t i = 0; i < emoji_set.size(); ++i) {
    if (parse_single_emoji(emoji_set[i].emoji).key() == key) return i;
  }
  throw SchemaError("emoji " + std::string(emoji) + " is not part of the session");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Emoji keys compare without U+FE0F.
std::u32string key_of(std::string_view emoji) { return parse_single_emoji(emoji).key(); }

}  // namespace

std::map<std::string, std::vector<std::string>> parse_prompt_file(std::string_view text) {
  std::map<std::string, std::vector<std::string>> out;
  std::string current;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      const auto inner = trim(std::string_view(line).substr(1, line.size() - 2));
      try {
        current = parse_single_emoji(inner).utf8();
      } catch (const Error&) {
        throw SchemaError("line " + std::to_string(line_no) + ": section header must hold one emoji");
      }
      if (out.contains(current)) {
        throw SchemaError("line " + std::to_string(line_no) + ": duplicate section " + current);
      }
      out[current];
      continue;
    }
    if (current.empty()) {
      throw SchemaError("line " + std::to_string(line_no) + ": phrase before the first [emoji] header");
    }
    out[current].push_back(line);
  }
  return out;
}

PromptSession build_session(std::string_view prompt_file_text, std::string speaker_name,
                            std::vector<SessionEmoji> emoji_set, std::size_t max_per_emoji) {
  if (emoji_set.empty()) throw SchemaError("emoji set is empty");
  const auto sections = parse_prompt_file(prompt_file_text);
  PromptSession session;
  session.speaker_name = std::move(speaker_name);
  for (const auto& e : emoji_set) {
    const auto key = key_of(e.emoji);
    auto it = std::find_if(sections.begin(), sections.end(),
                           [&](const auto& kv) { return key_of(kv.first) == key; });
    if (it == sections.end()) throw SchemaError("prompt file has no [" + e.emoji + "] section");
    if (it->second.empty()) throw SchemaError("section [" + e.emoji + "] has no phrases");
    auto phrases = it->second;
    if (phrases.size() > max_per_emoji) phrases.resize(max_per_emoji);
    session.prompts[e.emoji] = std::move(phrases);
  }
  session.emoji_set = std::move(emoji_set);
  return session;
}

std::string recording_relative_path(std::size_t emoji_index, std::size_t prompt_index) {
  return "wavs/" + std::to_string(emoji_index) + "_" + std::to_string(prompt_index) + ".wav";
}

void import_recording(PromptSession& session, const fs::path& session_dir, std::size_t emoji_index,
                      std::size_t prompt_index, const fs::path& wav) {
  if (emoji_index >= session.emoji_set.size()) throw SchemaError("emoji index out of range");
  const auto& phrases = session.prompts.at(session.emoji_set[emoji_index].emoji);
  if (prompt_index >= phrases.size()) throw SchemaError("prompt index out of range");
  const auto clip = read_wav(wav);
  const auto rel = recording_relative_path(emoji_index, prompt_index);
  fs::create_directories(session_dir / "wavs");
  write_wav(session_dir / rel, clip);
  session.recordings[{emoji_index, prompt_index}] = Recording{rel, clip.duration()};
}

void save_session(const PromptSession& session, const fs::path& session_dir) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["speaker_name"] = session.speaker_name;
  j["emoji_set"] = nlohmann::json::array();
  for (const auto& e : session.emoji_set) {
    j["emoji_set"].push_back({{"emoji", e.emoji}, {"style_id", e.style_id}});
  }
  j["prompts"] = nlohmann::json::object();
  for (const auto& e : session.emoji_set) j["prompts"][e.emoji] = session.prompts.at(e.emoji);
  j["recordings"] = nlohmann::json::array();
  for (const auto& [key, rec] : session.recordings) {
    j["recordings"].push_back({{"emoji_index", key.first},
                               {"prompt_index", key.second},
                               {"path", rec.relative_path},
                               {"duration_seconds", rec.duration_seconds}});
  }
  fs::create_directories(session_dir);
  write_file_atomic(session_dir / "session.json", j.dump(2) + "\n");
}

PromptSession load_session(const fs::path& session_dir) {
  const auto path = session_dir / "session.json";
  const auto text = read_file(path);
  try {
    const auto j = nlohmann::json::parse(text);
    PromptSession s;
    s.speaker_name = j.at("speaker_name").get<std::string>();
    for (const auto& e : j.at("emoji_set")) {
      s.emoji_set.push_back({e.at("emoji").get<std::string>(), e.at("style_id").get<int>()});
    }
    for (const auto& e : s.emoji_set) {
      s.prompts[e.emoji] = j.at("prompts").at(e.emoji).get<std::vector<std::string>>();
    }
    for (const auto& r : j.at("recordings")) {
      s.recordings[{r.at("emoji_index").get<std::size_t>(), r.at("prompt_index").get<std::size_t>()}] =
          Recording{r.at("path").get<std::string>(), r.at("duration_seconds").get<double>()};
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

std::string write_manifest(const Manifest& manifest) {
  std::string out;
  std::set<std::string> seen;
  for (const auto& row : manifest.rows) {
    if (row.text.find('|') != std::string::npos) {
      throw SchemaError("manifest text may not contain '|': " + row.text);
    }
    if (row.text.find_first_of("\r\n") != std::string::npos ||
        row.relative_wav_path.find_first_of("|\r\n") != std::string::npos) {
      throw SchemaError("manifest fields may not contain line breaks or '|'");
    }
    if (!seen.insert(row.relative_wav_path).second) {
      throw SchemaError("duplicate manifest path " + row.relative_wav_path);
    }
    out += row.relative_wav_path;
    out += '|';
    out += std::to_string(row.style_id);
    out += '|';
    out += row.text;
    out += '\n';
  }
  return out;
}

Manifest parse_manifest(std::string_view text, Split split) {
  Manifest m;
  m.split = split;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    const auto a = line.find('|');
    const auto b = a == std::string_view::npos ? a : line.find('|', a + 1);
    if (b == std::string_view::npos) {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": expected path|style_id|text");
    }
    ManifestRow row;
    row.relative_wav_path = std::string(line.substr(0, a));
    const auto id_text = std::string(line.substr(a + 1, b - a - 1));
    try {
      std::size_t used = 0;
      row.style_id = std::stoi(id_text, &used);
      if (used != id_text.size()) throw std::invalid_argument(id_text);
    } catch (const std::exception&) {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": bad style id \"" + id_text + "\"");
    }
    row.text = std::string(line.substr(b + 1));
    m.rows.push_back(std::move(row));
  }
  return m;
}

std::pair<Manifest, Manifest> split_manifest(const PromptSession& session, std::size_t train_n,
                                             std::size_t val_n, std::uint64_t seed) {
  Manifest train{Split::Train, {}};
  Manifest val{Split::Val, {}};
  for (std::size_t ei = 0; ei < session.emoji_set.size(); ++ei) {
    const auto& e = session.emoji_set[ei];
    std::vector<std::size_t> indices;
    for (const auto& [key, rec] : session.recordings) {
      if (key.first == ei) indices.push_back(key.second);
    }
    if (indices.size() < train_n + val_n) {
      throw CountError(e.emoji, "has " + std::to_string(indices.size()) + " recordings, needs " +
                                    std::to_string(train_n + val_n));
    }
    // Fisher-Yates driven by raw mt19937_64 output so the order does not
    // depend on the standard library's distribution implementations.
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * (ei + 1)));
    for (std::size_t i = indices.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
      std::swap(indices[i], indices[j]);
    }
    const auto& phrases = session.prompts.at(e.emoji);
    for (std::size_t k = 0; k < train_n + val_n; ++k) {
      const auto pi = indices[k];
      ManifestRow row{session.recordings.at({ei, pi}).relative_path, e.style_id, phrases.at(pi)};
      (k < train_n ? train : val).rows.push_back(std::move(row));
    }
  }
  return {std::move(train), std::move(val)};
}

AuditReport duration_audit(const PromptSession& session, const fs::path& session_dir,
                           double min_seconds) {
  AuditReport report;
  for (std::size_t ei = 0; ei < session.emoji_set.size(); ++ei) {
    AuditEntry entry;
    entry.emoji = session.emoji_set[ei].emoji;
    for (const auto& [key, rec] : session.recordings) {
      if (key.first != ei) continue;
      entry.total_seconds += read_wav(session_dir / rec.relative_path).duration();
      ++entry.recordings;
    }
    if (entry.total_seconds < min_seconds) {
      entry.shortfall_seconds = min_seconds - entry.total_seconds;
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s: %.1f s recorded, %.1f s short of %.0f s", entry.emoji.c_str(),
                    entry.total_seconds, *entry.shortfall_seconds, min_seconds);
      report.warnings.emplace_back(buf);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace emojivoice
