#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace emojivoice {

inline constexpr int kDefaultSampleRate = 22050;

// Mono audio; samples lie in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kDefaultSampleRate;
  double synth_wall_time = 0.0;  // seconds spent generating the samples

  double duration() const noexcept {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// RIFF/WAVE, PCM 16-bit little endian, mono.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);
// Accepts PCM 16-bit of any channel count (mixed down to mono).
// Throws IoError("<memory>") on malformed input.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

std::int16_t to_pcm16(float sample) noexcept;
std::vector<std::int16_t> to_pcm16(std::span<const float> samples);

// Written via a temporary file and rename.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);
AudioClip read_wav(const std::filesystem::path& path);

}  // namespace emojivoice
