#include "emojivoice/voice_registry.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include <spdlog/spdlog.h>

#include "emojivoice/error.hpp"
#include "shipped_voices.hpp"

namespace emojivoice {

void validate(const ProsodyParams& p, const std::string& path) {
  auto finite = [&](double v, const char* field) {
    if (!std::isfinite(v)) throw ConfigError(path + "." + field, "must be finite");
  };
  finite(p.base_f0_hz, "base_f0_hz");
  finite(p.f0_range_semitones, "f0_range_semitones");
  finite(p.rate_sps, "rate_sps");
  finite(p.energy_db, "energy_db");
  if (p.base_f0_hz < 50.0 || p.base_f0_hz > 600.0) {
    throw ConfigError(path + ".base_f0_hz", "must lie in [50, 600]");
  }
  if (p.f0_range_semitones < 0.0) throw ConfigError(path + ".f0_range_semitones", "must be >= 0");
  if (p.rate_sps < 1.0 || p.rate_sps > 10.0) throw ConfigError(path + ".rate_sps", "must lie in [1, 10]");
}

std::string_view to_string(Fallback f) {
  switch (f) {
    case Fallback::None: return "none";
    case Fallback::NoEmoji: return "no_emoji";
    case Fallback::UnknownEmoji: return "unknown_emoji";
  }
  return "none";
}

StyleRegistry::StyleRegistry(std::string speaker_name, std::vector<VoiceStyle> styles,
                             int default_style_id)
    : speaker_name_(std::move(speaker_name)),
      styles_(std::move(styles)),
      default_style_id_(default_style_id) {
  if (speaker_name_.empty()) throw ConfigError("speaker_name", "must not be empty");
  if (styles_.empty()) throw EmptyRegistryError();
  std::sort(styles_.begin(), styles_.end(),
            [](const VoiceStyle& a, const VoiceStyle& b) { return a.style_id < b.style_id; });
  for (std::size_t i = 0; i < styles_.size(); ++i) {
    const auto& s = styles_[i];
    const std::string path = "styles[" + std::to_string(i) + "]";
    if (s.style_id < 0) throw ConfigError(path + ".id", "must be non-negative");
    if (s.name.empty()) throw ConfigError(path + ".name", "must not be empty");
    validate(s.prosody, path);
    if (i > 0 && styles_[i - 1].style_id == s.style_id) {
      throw UniquenessError("duplicate style id " + std::to_string(s.style_id));
    }
    if (!by_key_.emplace(s.emoji.key(), i).second) {
      throw UniquenessError("duplicate emoji " + s.emoji.utf8());
    }
  }
  if (find(default_style_id_) == nullptr) {
    throw ConfigError("default_style_id",
                      "style " + std::to_string(default_style_id_) + " is not defined");
  }
}

const VoiceStyle* StyleRegistry::find(int style_id) const noexcept {
  auto it = std::lower_bound(styles_.begin(), styles_.end(), style_id,
                             [](const VoiceStyle& s, int id) { return s.style_id < id; });
  return it != styles_.end() && it->style_id == style_id ? &*it : nullptr;
}

const VoiceStyle* StyleRegistry::find(const EmojiToken& emoji) const noexcept {
  auto it = by_key_.find(emoji.key());
  return it == by_key_.end() ? nullptr : &styles_[it->second];
}

const VoiceStyle& StyleRegistry::style(int style_id) const {
  if (const auto* s = find(style_id)) return *s;
  throw StyleError("speaker " + speaker_name_ + " has no style id " + std::to_string(style_id));
}

std::vector<std::string> StyleRegistry::emoji_list() const {
  std::vector<std::string> out;
  out.reserve(styles_.size());
  for (const auto& s : styles_) out.push_back(s.emoji.utf8());
  return out;
}

StyleResolution resolve(const StyleRegistry& registry, const std::optional<EmojiToken>& emoji) {
  if (!emoji) return {registry.default_style_id(), Fallback::NoEmoji};
  if (const auto* s = registry.find(*emoji)) return {s->style_id, Fallback::None};
  spdlog::debug("emoji {} not in registry {}, using default style {}", emoji->utf8(),
                registry.speaker_name(), registry.default_style_id());
  return {registry.default_style_id(), Fallback::UnknownEmoji};
}

namespace {

template <typename T>
T scalar(const YAML::Node& node, const std::string& path) {
  if (!node) throw ConfigError(path, "missing field");
  if (!node.IsScalar()) throw ConfigError(path, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path, "invalid value \"" + node.Scalar() + "\"");
  }
}

VoiceStyle parse_style(const YAML::Node& node, const std::string& path) {
  if (!node.IsMap()) throw ConfigError(path, "expected a mapping");
  VoiceStyle s;
  const auto emoji_text = scalar<std::string>(node["emoji"], path + ".emoji");
  try {
    s.emoji = parse_single_emoji(emoji_text);
  } catch (const Error& e) {
    throw ConfigError(path + ".emoji", e.what());
  }
  s.style_id = scalar<int>(node["id"], path + ".id");
  s.name = scalar<std::string>(node["name"], path + ".name");
  s.prosody.base_f0_hz = scalar<double>(node["base_f0_hz"], path + ".base_f0_hz");
  s.prosody.f0_range_semitones =
      scalar<double>(node["f0_range_semitones"], path + ".f0_range_semitones");
  s.prosody.rate_sps = scalar<double>(node["rate_sps"], path + ".rate_sps");
  s.prosody.energy_db = scalar<double>(node["energy_db"], path + ".energy_db");
  validate(s.prosody, path);
  return s;
}

}  // namespace

StyleRegistry load_registry(std::string_view document) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(document));
  } catch (const YAML::Exception& e) {
    throw ConfigError("<document>", e.what());
  }
  if (!root.IsMap()) throw ConfigError("<document>", "expected a mapping at top level");

  const auto speaker = scalar<std::string>(root["speaker_name"], "speaker_name");
  const auto styles_node = root["styles"];
  if (!styles_node) throw ConfigError("styles", "missing field");
  if (styles_node.IsNull() || (styles_node.IsSequence() && styles_node.size() == 0)) {
    throw EmptyRegistryError();
  }
  if (!styles_node.IsSequence()) throw ConfigError("styles", "expected a list");

  std::vector<VoiceStyle> styles;
  for (std::size_t i = 0; i < styles_node.size(); ++i) {
    styles.push_back(parse_style(styles_node[i], "styles[" + std::to_string(i) + "]"));
  }

  const bool has_emoji = static_cast<bool>(root["default_emoji"]);
  const bool has_id = static_cast<bool>(root["default_style_id"]);
  if (has_emoji == has_id) {
    throw ConfigError("default_emoji", "exactly one of default_emoji or default_style_id is required");
  }
  int default_id = 0;
  if (has_id) {
    default_id = scalar<int>(root["default_style_id"], "default_style_id");
  } else {
    const auto text = scalar<std::string>(root["default_emoji"], "default_emoji");
    EmojiToken tok;
    try {
      tok = parse_single_emoji(text);
    } catch (const Error& e) {
      throw ConfigError("default_emoji", e.what());
    }
    auto it = std::find_if(styles.begin(), styles.end(),
                           [&](const VoiceStyle& s) { return s.emoji.key() == tok.key(); });
    if (it == styles.end()) throw ConfigError("default_emoji", text + " is not one of the styles");
    default_id = it->style_id;
  }
  return StyleRegistry(speaker, std::move(styles), default_id);
}

StyleRegistry load_registry_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open registry");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_registry(text);
}

std::vector<std::string> shipped_speakers() { return {"Paige", "Olivia", "Zach"}; }

StyleRegistry shipped_registry(std::string_view speaker) {
  if (speaker == "Paige") return load_registry(shipped::kPaige);
  if (speaker == "Olivia") return load_registry(shipped::kOlivia);
  if (speaker == "Zach") return load_registry(shipped::kZach);
  throw StyleError("no shipped registry for speaker " + std::string(speaker));
}

void RegistrySet::add(StyleRegistry registry) {
  auto name = registry.speaker_name();
  auto ptr = std::make_shared<const StyleRegistry>(std::move(registry));
  if (!by_name_.emplace(name, std::move(ptr)).second) {
    throw UniquenessError("duplicate speaker " + name);
  }
  order_.push_back(std::move(name));
}

std::shared_ptr<const StyleRegistry> RegistrySet::get(std::string_view speaker) const {
  if (order_.empty()) throw StyleError("no registries loaded");
  if (speaker.empty()) return by_name_.find(order_.front())->second;
  auto it = by_name_.find(speaker);
  if (it == by_name_.end()) throw StyleError("unknown speaker " + std::string(speaker));
  return it->second;
}

RegistrySet RegistrySet::shipped() {
  RegistrySet set;
  for (const auto& name : shipped_speakers()) set.add(shipped_registry(name));
  return set;
}

}  // namespace emojivoice
