#include "emojivoice/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "emojivoice/error.hpp"
#include "emojivoice/utf8.hpp"

namespace emojivoice {

namespace {

constexpr int kHarmonics = 8;
constexpr double kNoiseDb = -30.0;
constexpr double kAttackFraction = 0.25;  // of each syllable, per side
constexpr double kPeakLevel = 0.5;

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9') ||
           cp == '\'';
  }
  if (cp >= 0x80 && cp <= 0xBF) return false;      // Latin-1 punctuation and symbols
  if (cp >= 0x2000 && cp <= 0x206F) return false;  // general punctuation
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  return cp != 0x2019;
}

bool is_vowel(char32_t cp) {
  switch (cp) {
    case 'a': case 'e': case 'i': case 'o': case 'u': case 'y':
    case 'A': case 'E': case 'I': case 'O': case 'U': case 'Y':
      return true;
    default:
      return false;
  }
}

void require_text(std::string_view text) {
  if (text.empty()) throw PreconditionError("synthesis text must not be empty");
}

double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Flat-topped raised-cosine envelope of one syllable, u in [0, 1).
double syllable_envelope(double u) {
  if (u < kAttackFraction) return 0.5 * (1.0 - std::cos(std::numbers::pi * u / kAttackFraction));
  if (u > 1.0 - kAttackFraction) {
    return 0.5 * (1.0 - std::cos(std::numbers::pi * (1.0 - u) / kAttackFraction));
  }
  return 1.0;
}

}  // namespace

int syllable_count(std::string_view text) {
  int total = 0;
  int in_word_groups = 0;
  bool in_word = false;
  bool prev_vowel = false;
  for (const auto& s : utf8::decode(text)) {
    if (!is_word_char(s.value)) {
      if (in_word) total += std::max(1, in_word_groups);
      in_word = false;
      in_word_groups = 0;
      prev_vowel = false;
      continue;
    }
    in_word = true;
    const bool v = is_vowel(s.value);
    if (v && !prev_vowel) ++in_word_groups;
    prev_vowel = v;
  }
  if (in_word) total += std::max(1, in_word_groups);
  return total;
}

double parametric_duration(std::string_view clean_text, const ProsodyParams& prosody) {
  require_text(clean_text);
  return syllable_count(clean_text) / prosody.rate_sps + kTrailingSilenceSeconds;
}

double F0Contour::at(double t) const {
  if (knots.empty()) return 0.0;
  if (t <= knots.front().first) return knots.front().second;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    const auto& [t1, f1] = knots[i];
    if (t <= t1) {
      const auto& [t0, f0] = knots[i - 1];
      const double w = t1 > t0 ? (t - t0) / (t1 - t0) : 1.0;
      return f0 + w * (f1 - f0);
    }
  }
  return knots.back().second;
}

double F0Contour::median(double step) const {
  const double d = duration();
  std::vector<double> values;
  for (double t = 0.0; t <= d; t += step) values.push_back(at(t));
  if (values.empty()) values.push_back(at(0.0));
  return percentile(std::move(values), 0.5);
}

F0Contour parametric_f0_contour(std::string_view clean_text, const ProsodyParams& prosody) {
  require_text(clean_text);
  const double voiced = syllable_count(clean_text) / prosody.rate_sps;
  const double hi = prosody.base_f0_hz * std::exp2(prosody.f0_range_semitones / 24.0);
  const double lo = prosody.base_f0_hz * std::exp2(-prosody.f0_range_semitones / 24.0);
  F0Contour c;
  const auto last = clean_text.find_last_not_of(" \t\r\n");
  const bool question = last != std::string_view::npos && clean_text[last] == '?';
  if (question) {
    c.knots = {{0.0, hi}, {0.8 * voiced, lo}, {voiced, hi}};
  } else {
    c.knots = {{0.0, hi}, {voiced, lo}};
  }
  return c;
}

std::vector<double> F0Track::voiced() const {
  std::vector<double> out;
  for (const auto& f : frames) {
    if (f) out.push_back(*f);
  }
  return out;
}

std::optional<double> F0Track::median() const {
  auto v = voiced();
  if (v.empty()) return std::nullopt;
  return percentile(std::move(v), 0.5);
}

std::optional<double> F0Track::span() const {
  auto v = voiced();
  if (v.empty()) return std::nullopt;
  return percentile(v, 0.95) - percentile(v, 0.05);
}

F0Track estimate_f0(const AudioClip& clip, double frame_seconds, double hop_seconds) {
  constexpr double kMinF0 = 50.0;
  constexpr double kMaxF0 = 600.0;
  constexpr double kVoicing = 0.5;
  constexpr double kSilenceDb = -30.0;
  constexpr double kFirstPeakRatio = 0.9;

  const int sr = clip.sample_rate;
  const auto frame = static_cast<std::size_t>(std::lround(frame_seconds * sr));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(hop_seconds * sr)));
  if (clip.samples.size() < frame || frame == 0) {
    throw LengthError("clip of " + std::to_string(clip.samples.size()) +
                      " samples is shorter than one analysis frame");
  }
  const auto min_lag = static_cast<std::size_t>(std::floor(sr / kMaxF0));
  const auto max_lag = std::min(frame - 2, static_cast<std::size_t>(std::ceil(sr / kMinF0)));

  F0Track track;
  track.hop_seconds = static_cast<double>(hop) / sr;
  const std::size_t n_frames = (clip.samples.size() - frame) / hop + 1;

  std::vector<double> rms(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < frame; ++i) {
      const double v = clip.samples[f * hop + i];
      acc += v * v;
    }
    rms[f] = std::sqrt(acc / frame);
  }
  const double loudest = *std::max_element(rms.begin(), rms.end());
  const double floor = std::max(1e-4, loudest * std::pow(10.0, kSilenceDb / 20.0));

  std::vector<double> x(frame);
  std::vector<double> prefix(frame + 1);
  std::vector<double> r(max_lag + 2, 0.0);
  track.frames.resize(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    if (rms[f] < floor) continue;
    double mean = 0.0;
    for (std::size_t i = 0; i < frame; ++i) mean += clip.samples[f * hop + i];
    mean /= frame;
    prefix[0] = 0.0;
    for (std::size_t i = 0; i < frame; ++i) {
      x[i] = clip.samples[f * hop + i] - mean;
      prefix[i + 1] = prefix[i] + x[i] * x[i];
    }
    for (std::size_t lag = min_lag; lag <= max_lag + 1; ++lag) {
      double cross = 0.0;
      for (std::size_t i = 0; i + lag < frame; ++i) cross += x[i] * x[i + lag];
      const double e0 = prefix[frame - lag];
      const double e1 = prefix[frame] - prefix[lag];
      r[lag] = (e0 > 0.0 && e1 > 0.0) ? cross / std::sqrt(e0 * e1) : 0.0;
    }
    double best = 0.0;
    for (std::size_t lag = min_lag + 1; lag <= max_lag; ++lag) {
      if (r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1]) best = std::max(best, r[lag]);
    }
    if (best < kVoicing) continue;
    for (std::size_t lag = min_lag + 1; lag <= max_lag; ++lag) {
      if (r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1] && r[lag] >= kFirstPeakRatio * best) {
        const double denom = r[lag - 1] - 2.0 * r[lag] + r[lag + 1];
        const double shift = denom != 0.0 ? 0.5 * (r[lag - 1] - r[lag + 1]) / denom : 0.0;
        const double f0 = sr / (static_cast<double>(lag) + shift);
        if (f0 >= kMinF0 && f0 <= kMaxF0) track.frames[f] = f0;
        break;
      }
    }
  }
  return track;
}

double compute_rtf(double audio_seconds, double synth_seconds) {
  if (!(audio_seconds > 0.0)) throw DomainError("audio duration must be positive to compute RTF");
  return synth_seconds / audio_seconds;
}

ParametricBackend::ParametricBackend(std::shared_ptr<const StyleRegistry> registry, int sample_rate)
    : registry_(std::move(registry)), sample_rate_(sample_rate) {
  if (!registry_) throw PreconditionError("parametric backend needs a registry");
  if (sample_rate_ <= 0) throw PreconditionError("sample rate must be positive");
}

AudioClip ParametricBackend::synthesize(const SynthRequest& request) {
  require_text(request.clean_text);
  if (!scan_emoji(request.clean_text).empty()) {
    throw PreconditionError("synthesis text must be emoji-free");
  }
  const auto& style = registry_->style(request.style_id);
  const auto start = std::chrono::steady_clock::now();
  AudioClip clip = render(request.clean_text, style.prosody, request.seed);
  clip.synth_wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return clip;
}

AudioClip ParametricBackend::render(std::string_view clean_text, const ProsodyParams& prosody,
                                    std::uint64_t seed) const {
  const int syllables = syllable_count(clean_text);
  const double voiced = syllables / prosody.rate_sps;
  const double total = parametric_duration(clean_text, prosody);
  const F0Contour contour = parametric_f0_contour(clean_text, prosody);
  const double sr = sample_rate_;

  const auto n_total = static_cast<std::size_t>(std::lround(total * sr));
  const auto n_voiced = std::min(n_total, static_cast<std::size_t>(std::lround(voiced * sr)));

  double harmonic_power = 0.0;
  for (int h = 1; h <= kHarmonics; ++h) harmonic_power += 0.5 / (h * h);
  const double noise_rms = std::sqrt(harmonic_power) * std::pow(10.0, kNoiseDb / 20.0);
  const double noise_amp = noise_rms * std::sqrt(3.0);  // uniform [-a, a]
  // Peak of sum(sin(h x)/h, h=1..8) is about 1.85.
  const double gain = kPeakLevel / 1.85 * std::pow(10.0, prosody.energy_db / 20.0);

  std::mt19937_64 rng(seed);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  AudioClip clip;
  clip.sample_rate = sample_rate_;
  clip.samples.assign(std::max<std::size_t>(n_total, 1), 0.0f);
  double phase = 0.0;
  for (std::size_t n = 0; n < n_voiced; ++n) {
    const double t = n / sr;
    const double f0 = contour.at(t);
    double s = 0.0;
    for (int h = 1; h <= kHarmonics && h * f0 < 0.5 * sr; ++h) s += std::sin(h * phase) / h;
    // 53 high bits of the generator mapped to [-1, 1).
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    s += noise_amp * u;
    const double pos = t * prosody.rate_sps;
    const double env = syllable_envelope(pos - std::floor(pos));
    clip.samples[n] = static_cast<float>(std::clamp(gain * env * s, -1.0, 1.0));
    phase = std::fmod(phase + kTwoPi * f0 / sr, kTwoPi);
  }
  return clip;
}

}  // namespace emojivoice
