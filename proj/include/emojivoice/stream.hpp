#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emojivoice/emoji_text.hpp"
#include "emojivoice/synth.hpp"
#include "emojivoice/voice_registry.hpp"

namespace emojivoice {

inline constexpr double kInterPhrasePauseSeconds = 0.2;

struct RtfRow {
  std::size_t phrase_index = 0;
  double audio_seconds = 0.0;
  double synth_seconds = 0.0;
  double rtf = 0.0;
  int style_id = 0;
  Fallback fallback = Fallback::None;
  // Seconds since the stream started.
  double play_start = 0.0;
  double play_end = 0.0;
  double gap_before = 0.0;  // silence since the previous phrase ended
};

struct RtfReport {
  std::vector<RtfRow> rows;
  std::optional<std::string> error;  // set when the stream was aborted

  // Appends a row with rtf = synth / audio. Throws DomainError if audio <= 0.
  RtfRow& add(std::size_t phrase_index, double audio_seconds, double synth_seconds);
  double mean_rtf() const;
  double max_rtf() const;
  bool complete() const { return !error.has_value(); }
};

struct PlaybackItem {
  std::size_t phrase_index;
  const AnnotatedPhrase& phrase;
  int style_id;
  const AudioClip& clip;
};

// Receives clips in source order. play() returns when playback finished.
class PlaybackSink {
 public:
  virtual ~PlaybackSink() = default;
  virtual void play(const PlaybackItem& item) = 0;
};

struct StreamOptions {
  double inter_phrase_pause = kInterPhrasePauseSeconds;
  // Enforce the inter-phrase pause in wall-clock time. Off for sinks that
  // only write files.
  bool pace = true;
  std::uint64_t seed = 0;
};

// Synthesizes phrase n+1 while phrase n plays (lookahead of one). On a
// backend error the phrases already handed over finish playing, then the
// partial report comes back with error set.
RtfReport stream_script(const Script& script, const StyleRegistry& registry, SynthBackend& backend,
                        PlaybackSink& sink, const StreamOptions& options = {});

struct PlannedPhrase {
  double synth_start;
  double ready;
  double play_start;
  double play_end;
  double gap_before;
};

// Timeline of the lookahead-one schedule for given synthesis and audio
// durations, with instantaneous hand-off and the fixed pause between
// phrases.
std::vector<PlannedPhrase> plan_playback(std::span<const double> synth_seconds,
                                         std::span<const double> audio_seconds,
                                         double pause = kInterPhrasePauseSeconds);

}  // namespace emojivoice
