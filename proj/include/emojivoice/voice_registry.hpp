#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emojivoice/emoji_text.hpp"
#include "emojivoice/error.hpp"

namespace emojivoice {

struct ProsodyParams {
  double base_f0_hz = 200.0;        // mid pitch, [50, 600]
  double f0_range_semitones = 0.0;  // >= 0
  double rate_sps = 4.0;            // syllables per second, [1, 10]
  double energy_db = 0.0;

  friend bool operator==(const ProsodyParams&, const ProsodyParams&) = default;
};

// Throws ConfigError (prefixed with path) when a field is out of range.
void validate(const ProsodyParams& p, const std::string& path = "prosody");

struct VoiceStyle {
  EmojiToken emoji;
  int style_id = 0;
  std::string name;
  ProsodyParams prosody;
};

enum class Fallback { None, NoEmoji, UnknownEmoji };

std::string_view to_string(Fallback f);

struct StyleResolution {
  int style_id = 0;
  Fallback fallback = Fallback::None;

  bool fell_back() const noexcept { return fallback != Fallback::None; }
};

// Immutable after construction; share it freely across threads.
class StyleRegistry {
 public:
  // Validates every invariant; throws ConfigError or UniquenessError.
  StyleRegistry(std::string speaker_name, std::vector<VoiceStyle> styles, int default_style_id);

  const std::string& speaker_name() const noexcept { return speaker_name_; }
  // Ordered by style_id.
  std::span<const VoiceStyle> styles() const noexcept { return styles_; }
  int default_style_id() const noexcept { return default_style_id_; }

  const VoiceStyle* find(int style_id) const noexcept;
  const VoiceStyle* find(const EmojiToken& emoji) const noexcept;
  // Throws StyleError for an id the registry does not define.
  const VoiceStyle& style(int style_id) const;

  // UTF-8 emojis in style_id order.
  std::vector<std::string> emoji_list() const;

 private:
  std::string speaker_name_;
  std::vector<VoiceStyle> styles_;
  std::map<std::u32string, std::size_t> by_key_;
  int default_style_id_;
};

// Exact match ignoring U+FE0F, otherwise the default style. Total.
StyleResolution resolve(const StyleRegistry& registry, const std::optional<EmojiToken>& emoji);

// A registry document whose styles list is empty. Callers that tolerate
// optional speakers (the server) skip these.
class EmptyRegistryError : public ConfigError {
 public:
  EmptyRegistryError() : ConfigError("styles", "at least one style is required") {}
};

// Parses the YAML registry schema (see data/voices/paige.yaml).
StyleRegistry load_registry(std::string_view document);
StyleRegistry load_registry_file(const std::filesystem::path& path);

// Registries compiled into the library: "Paige", "Olivia", "Zach".
std::vector<std::string> shipped_speakers();
StyleRegistry shipped_registry(std::string_view speaker = "Paige");

// Named registries; the first one added is the default speaker.
class RegistrySet {
 public:
  void add(StyleRegistry registry);
  bool empty() const noexcept { return order_.empty(); }
  // Throws StyleError for an unknown speaker. Empty name selects the default.
  std::shared_ptr<const StyleRegistry> get(std::string_view speaker = {}) const;
  const std::vector<std::string>& speakers() const noexcept { return order_; }

  static RegistrySet shipped();

 private:
  std::map<std::string, std::shared_ptr<const StyleRegistry>, std::less<>> by_name_;
  std::vector<std::string> order_;
};

}  // namespace emojivoice
