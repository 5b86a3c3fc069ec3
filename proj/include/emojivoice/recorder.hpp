#pragma once

// Data-collection sessions: one prompt queue per emoji, recordings stored
// as <dir>/wavs/<emoji_index>_<n>.wav with metadata in <dir>/session.json,
// and train/validation filelists in the `path|style_id|text` layout.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emojivoice/voice_registry.hpp"

namespace emojivoice {

inline constexpr std::size_t kPromptsPerEmoji = 50;
inline constexpr std::size_t kDefaultTrainCount = 40;
inline constexpr std::size_t kDefaultValCount = 10;
inline constexpr double kMinSecondsPerEmoji = 180.0;

// Instruction given to a chat model to draft a prompt file section; X is
// replaced by the emoji.
inline constexpr std::string_view kPromptGenerationTemplate =
    "Write 50 short sentences a person might say while feeling X. Vary the vocabulary so that "
    "together they cover every English phoneme, and avoid repeating sentence patterns.";

struct SessionEmoji {
  std::string emoji;  // UTF-8
  int style_id = 0;
};

// Registry emojis in style_id order.
std::vector<SessionEmoji> emoji_set_from(const StyleRegistry& registry);

struct Recording {
  std::string relative_path;  // relative to the session directory
  double duration_seconds = 0.0;
};

struct PromptSession {
  std::string speaker_name;
  std::vector<SessionEmoji> emoji_set;
  std::map<std::string, std::vector<std::string>> prompts;  // emoji -> phrases
  // (emoji index in emoji_set, prompt index) -> recording
  std::map<std::pair<std::size_t, std::size_t>, Recording> recordings;

  // Phrase with its target emoji appended, as shown to the speaker.
  std::string display_text(std::size_t emoji_index, std::size_t prompt_index) const;
  std::size_t total_prompts() const;
  std::size_t emoji_index(std::string_view emoji) const;  // throws SchemaError
};

// `[emoji]` header lines, then one phrase per line. Blank lines and lines
// starting with '#' are ignored. Throws SchemaError.
std::map<std::string, std::vector<std::string>> parse_prompt_file(std::string_view text);

// Keeps at most max_per_emoji phrases per emoji. Throws SchemaError when an
// emoji of the set has no section or no phrases.
PromptSession build_session(std::string_view prompt_file_text, std::string speaker_name,
                            std::vector<SessionEmoji> emoji_set,
                            std::size_t max_per_emoji = kPromptsPerEmoji);

std::string recording_relative_path(std::size_t emoji_index, std::size_t prompt_index);

// Copies a WAV into <session_dir>/wavs and registers it.
void import_recording(PromptSession& session, const std::filesystem::path& session_dir,
                      std::size_t emoji_index, std::size_t prompt_index,
                      const std::filesystem::path& wav);

void save_session(const PromptSession& session, const std::filesystem::path& session_dir);
PromptSession load_session(const std::filesystem::path& session_dir);

struct ManifestRow {
  std::string relative_wav_path;
  int style_id = 0;
  std::string text;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

enum class Split { Train, Val };

struct Manifest {
  Split split = Split::Train;
  std::vector<ManifestRow> rows;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

// One LF-terminated line per row. Throws SchemaError for a text holding
// '|' or a line break, or a duplicate path.
std::string write_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text, Split split);

// Seeded per-emoji shuffle; the first train_n recordings go to train, the
// next val_n to val. Throws CountError naming the first short emoji.
std::pair<Manifest, Manifest> split_manifest(const PromptSession& session,
                                             std::size_t train_n = kDefaultTrainCount,
                                             std::size_t val_n = kDefaultValCount,
                                             std::uint64_t seed = 0);

struct AuditEntry {
  std::string emoji;
  double total_seconds = 0.0;
  std::size_t recordings = 0;
  std::optional<double> shortfall_seconds;  // set when under the minimum
};

struct AuditReport {
  std::vector<AuditEntry> entries;
  std::vector<std::string> warnings;
};

// Re-measures every recording from disk. Throws IoError with the path of
// an unreadable file.
AuditReport duration_audit(const PromptSession& session, const std::filesystem::path& session_dir,
                           double min_seconds = kMinSecondsPerEmoji);

}  // namespace emojivoice
