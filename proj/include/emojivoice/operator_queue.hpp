#pragma once

// Operator-driven speech queue: lines are enqueued with an emoji, spoken
// one at a time in FIFO order, and can be reordered, skipped or stopped.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "emojivoice/audio.hpp"
#include "emojivoice/synth.hpp"
#include "emojivoice/voice_registry.hpp"

namespace emojivoice {

enum class ItemStatus { Queued, Speaking, Done, Skipped, Failed };

std::string_view to_string(ItemStatus status) noexcept;
bool is_terminal(ItemStatus status) noexcept;

struct OperatorQueueItem {
  std::uint64_t item_id = 0;
  std::string clean_text;
  std::string emoji;  // as given; empty when none
  int style_id = 0;
  Fallback fallback = Fallback::None;
  ItemStatus status = ItemStatus::Queued;
  std::optional<double> rtf;
  std::optional<double> audio_seconds;
  bool interrupted = false;
  std::string error;
};

// Plays one clip. Must return early once `interrupt` becomes true.
class ClipPlayer {
 public:
  virtual ~ClipPlayer() = default;
  virtual void play(const OperatorQueueItem& item, const AudioClip& clip, const std::atomic<bool>& interrupt) = 0;
};

// Events are delivered one at a time, in causal order, from whichever
// thread caused them. Callbacks must not call back into the queue.
using OperatorEventFn = std::function<void(const OperatorQueueItem&)>;

class OperatorQueue {
 public:
  OperatorQueue(std::shared_ptr<const StyleRegistry> registry, std::unique_ptr<SynthBackend> backend,
                std::shared_ptr<ClipPlayer> player, OperatorEventFn on_event, std::uint64_t seed = 0);
  ~OperatorQueue();

  OperatorQueue(const OperatorQueue&) = delete;
  OperatorQueue& operator=(const OperatorQueue&) = delete;

  // `text` may carry emojis; they are stripped. `emoji` (one cluster or
  // empty) selects the style. Throws PreconditionError when nothing is
  // left to speak and DecodeError for a malformed emoji.
  std::uint64_t enqueue(std::string_view text, std::string_view emoji);
  // Moves a queued item to `position` among the queued items (clamped).
  // Throws StateError unless the item is queued.
  void reorder(std::uint64_t item_id, std::size_t position);
  // Queued -> skipped. Throws StateError otherwise.
  void skip(std::uint64_t item_id);
  // Interrupts the item being spoken; it ends as done with interrupted
  // set. Queued items stay queued. Returns false if nothing was speaking.
  bool stop();

  std::vector<OperatorQueueItem> snapshot() const;
  // Blocks until no item is queued or speaking.
  void wait_idle();
  // Stops the worker. Items still queued stay queued.
  void shutdown();

 private:
  void worker();
  void emit(const OperatorQueueItem& item);
  OperatorQueueItem& item(std::uint64_t id);

  std::shared_ptr<const StyleRegistry> registry_;
  std::unique_ptr<SynthBackend> backend_;
  std::shared_ptr<ClipPlayer> player_;
  OperatorEventFn on_event_;
  std::uint64_t seed_;

  mutable std::mutex mu_;
  std::mutex event_mu_;
  std::condition_variable cv_;
  std::map<std::uint64_t, OperatorQueueItem> items_;
  std::deque<std::uint64_t> pending_;
  std::optional<std::uint64_t> speaking_;
  std::uint64_t next_id_ = 1;
  bool shutting_down_ = false;
  std::atomic<bool> interrupt_{false};
  std::thread thread_;
};

}  // namespace emojivoice
