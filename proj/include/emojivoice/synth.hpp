#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emojivoice/audio.hpp"
#include "emojivoice/voice_registry.hpp"

namespace emojivoice {

struct SynthRequest {
  std::string clean_text;  // emoji-free, non-empty
  int style_id = 0;
  std::uint64_t seed = 0;
};

// One in-flight synthesize() per instance.
class SynthBackend {
 public:
  virtual ~SynthBackend() = default;
  // Throws PreconditionError for empty/emoji-bearing text, StyleError for
  // an unknown style and TransportError when a remote backend fails.
  virtual AudioClip synthesize(const SynthRequest& request) = 0;
  virtual std::string name() const = 0;
};

// Trailing silence appended to every parametric clip.
inline constexpr double kTrailingSilenceSeconds = 0.15;

// Maximal groups of vowel letters (a e i o u y) per word, at least one per
// word. Words are runs of letters, digits and apostrophes.
int syllable_count(std::string_view text);

// syllables / rate + trailing silence. Throws PreconditionError on "".
double parametric_duration(std::string_view clean_text, const ProsodyParams& prosody);

// Piecewise-linear F0 over the voiced part of a phrase, t in seconds.
struct F0Contour {
  std::vector<std::pair<double, double>> knots;  // (time, Hz), time ascending

  double at(double t) const;
  double duration() const { return knots.empty() ? 0.0 : knots.back().first; }
  // Median of the contour sampled every step seconds.
  double median(double step = 0.010) const;
};

// Declines linearly from base·2^(range/24) to base·2^(-range/24) across the
// voiced span; a trailing '?' makes the last 20% rise back to the start.
F0Contour parametric_f0_contour(std::string_view clean_text, const ProsodyParams& prosody);

struct F0Track {
  std::vector<std::optional<double>> frames;  // absent = unvoiced or silent
  double hop_seconds = 0.010;

  std::vector<double> voiced() const;
  std::optional<double> median() const;
  // p95 - p5 of voiced estimates.
  std::optional<double> span() const;
};

// Normalized autocorrelation pitch tracker. Throws LengthError when the
// clip is shorter than one frame.
F0Track estimate_f0(const AudioClip& clip, double frame_seconds = 0.040, double hop_seconds = 0.010);

// synth / audio. Throws DomainError when audio_seconds <= 0.
double compute_rtf(double audio_seconds, double synth_seconds);

// Deterministic harmonic source driven by a style's prosody: eight
// harmonics at 1/h amplitude plus white noise 30 dB down, shaped by one
// raised-cosine envelope per syllable.
class ParametricBackend final : public SynthBackend {
 public:
  explicit ParametricBackend(std::shared_ptr<const StyleRegistry> registry,
                             int sample_rate = kDefaultSampleRate);

  AudioClip synthesize(const SynthRequest& request) override;
  std::string name() const override { return "parametric"; }

  // Renders prosody directly, bypassing the registry.
  AudioClip render(std::string_view clean_text, const ProsodyParams& prosody,
                   std::uint64_t seed) const;

 private:
  std::shared_ptr<const StyleRegistry> registry_;
  int sample_rate_;
};

}  // namespace emojivoice
