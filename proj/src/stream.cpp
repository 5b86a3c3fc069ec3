#include "emojivoice/stream.hpp"

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <numeric>
#include <thread>
#include <variant>

#include <spdlog/spdlog.h>

#include "emojivoice/error.hpp"

namespace emojivoice {

RtfRow& RtfReport::add(std::size_t phrase_index, double audio_seconds, double synth_seconds) {
  RtfRow row;
  row.phrase_index = phrase_index;
  row.audio_seconds = audio_seconds;
  row.synth_seconds = synth_seconds;
  row.rtf = compute_rtf(audio_seconds, synth_seconds);
  rows.push_back(row);
  return rows.back();
}

double RtfReport::mean_rtf() const {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rows) sum += r.rtf;
  return sum / static_cast<double>(rows.size());
}

double RtfReport::max_rtf() const {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, r.rtf);
  return m;
}

namespace {

struct Synthesized {
  std::size_t index;
  StyleResolution style;
  AudioClip clip;
};

struct Failed {
  std::size_t index;
  std::string message;
};

using Handoff = std::variant<Synthesized, Failed>;

// Single-slot hand-off between the synthesis worker and the player.
class Slot {
 public:
  void put(Handoff item) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !item_ || cancelled_; });
    if (cancelled_) return;
    item_ = std::move(item);
    cv_.notify_all();
  }

  // Blocks until the slot is empty again (the player took the last item).
  bool wait_empty() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !item_ || cancelled_; });
    return !cancelled_;
  }

  Handoff take() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return item_.has_value(); });
    Handoff out = std::move(*item_);
    item_.reset();
    cv_.notify_all();
    return out;
  }

  void cancel() {
    std::lock_guard lock(mu_);
    cancelled_ = true;
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::optional<Handoff> item_;
  bool cancelled_ = false;
};

}  // namespace

RtfReport stream_script(const Script& script, const StyleRegistry& registry, SynthBackend& backend,
                        PlaybackSink& sink, const StreamOptions& options) {
  if (script.phrases.empty()) throw PreconditionError("no phrases");

  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto since = [&](clock::time_point t) { return std::chrono::duration<double>(t - t0).count(); };

  Slot slot;
  std::thread worker([&] {
    for (std::size_t i = 0; i < script.phrases.size(); ++i) {
      if (!slot.wait_empty()) return;
      const auto& phrase = script.phrases[i];
      const auto style = resolve(registry, phrase.style_emoji);
      try {
        auto clip = backend.synthesize({phrase.clean_text, style.style_id, options.seed + i});
        slot.put(Synthesized{i, style, std::move(clip)});
      } catch (const std::exception& e) {
        slot.put(Failed{i, e.what()});
        return;
      }
    }
  });

  RtfReport report;
  std::optional<clock::time_point> last_end;
  try {
    for (std::size_t i = 0; i < script.phrases.size(); ++i) {
      if (last_end && options.pace) {
        std::this_thread::sleep_until(
            *last_end + std::chrono::duration_cast<clock::duration>(
                            std::chrono::duration<double>(options.inter_phrase_pause)));
      }
      Handoff h = slot.take();
      if (auto* f = std::get_if<Failed>(&h)) {
        spdlog::error("synthesis failed on phrase {}: {}", f->index, f->message);
        report.error = "phrase " + std::to_string(f->index) + ": " + f->message;
        break;
      }
      auto& s = std::get<Synthesized>(h);
      auto& row = report.add(s.index, s.clip.duration(), s.clip.synth_wall_time);
      row.style_id = s.style.style_id;
      row.fallback = s.style.fallback;
      const auto start = clock::now();
      sink.play(PlaybackItem{s.index, script.phrases[s.index], s.style.style_id, s.clip});
      const auto end = clock::now();
      row.play_start = since(start);
      row.play_end = since(end);
      row.gap_before = last_end ? std::chrono::duration<double>(start - *last_end).count() : 0.0;
      last_end = end;
    }
  } catch (...) {
    slot.cancel();
    worker.join();
    throw;
  }
  slot.cancel();
  worker.join();
  return report;
}

std::vector<PlannedPhrase> plan_playback(std::span<const double> synth_seconds,
                                         std::span<const double> audio_seconds, double pause) {
  if (synth_seconds.size() != audio_seconds.size()) {
    throw PreconditionError("timing lists differ in length");
  }
  std::vector<PlannedPhrase> plan;
  plan.reserve(synth_seconds.size());
  double prev_end = 0.0;
  for (std::size_t i = 0; i < synth_seconds.size(); ++i) {
    PlannedPhrase p{};
    // Synthesis of phrase i starts once phrase i-1 was handed to the
    // player (or right away for the first phrase).
    p.synth_start = i == 0 ? 0.0 : std::max(plan[i - 1].ready, plan[i - 1].play_start);
    p.ready = p.synth_start + synth_seconds[i];
    p.play_start = i == 0 ? p.ready : std::max(prev_end + pause, p.ready);
    p.play_end = p.play_start + audio_seconds[i];
    p.gap_before = i == 0 ? 0.0 : p.play_start - prev_end;
    prev_end = p.play_end;
    plan.push_back(p);
  }
  return plan;
}

}  // namespace emojivoice
