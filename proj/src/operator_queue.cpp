#include "emojivoice/operator_queue.hpp"

#include <algorithm>
#include <chrono>

#include "emojivoice/emoji_text.hpp"
#include "emojivoice/error.hpp"

namespace emojivoice {

std::string_view to_string(ItemStatus status) noexcept {
  switch (status) {
    case ItemStatus::Queued: return "queued";
    case ItemStatus::Speaking: return "speaking";
    case ItemStatus::Done: return "done";
    case ItemStatus::Skipped: return "skipped";
    case ItemStatus::Failed: return "failed";
  }
  return "unknown";
}

bool is_terminal(ItemStatus status) noexcept {
  return status == ItemStatus::Done || status == ItemStatus::Skipped || status == ItemStatus::Failed;
}

OperatorQueue::OperatorQueue(std::shared_ptr<const StyleRegistry> registry, std::unique_ptr<SynthBackend> backend,
                             std::shared_ptr<ClipPlayer> player, OperatorEventFn on_event, std::uint64_t seed)
    : registry_(std::move(registry)),
      backend_(std::move(backend)),
      player_(std::move(player)),
      on_event_(std::move(on_event)),
      seed_(seed) {
  if (!registry_ || !backend_ || !player_) throw PreconditionError("operator queue needs registry, backend and player");
  thread_ = std::thread([this] { worker(); });
}

OperatorQueue::~OperatorQueue() { shutdown(); }

void OperatorQueue::emit(const OperatorQueueItem& item) {
  if (on_event_) on_event_(item);
}

OperatorQueueItem& OperatorQueue::item(std::uint64_t id) {
  auto it = items_.find(id);
  if (it == items_.end()) throw StateError("unknown item " + std::to_string(id));
  return it->second;
}

std::uint64_t OperatorQueue::enqueue(std::string_view text, std::string_view emoji) {
  std::optional<EmojiToken> token;
  if (!emoji.empty()) token = parse_single_emoji(emoji);
  std::string clean = strip_emoji(text);
  if (clean.empty()) throw PreconditionError("no speakable text");
  StyleResolution res = resolve(*registry_, token);

  std::lock_guard events(event_mu_);
  OperatorQueueItem copy;
  {
    std::lock_guard lock(mu_);
    if (shutting_down_) throw StateError("queue is shut down");
    OperatorQueueItem it;
    it.item_id = next_id_++;
    it.clean_text = std::move(clean);
    it.emoji = std::string(emoji);
    it.style_id = res.style_id;
    it.fallback = res.fallback;
    items_[it.item_id] = it;
    pending_.push_back(it.item_id);
    copy = it;
  }
  emit(copy);
  cv_.notify_all();
  return copy.item_id;
}

void OperatorQueue::reorder(std::uint64_t item_id, std::size_t position) {
  std::lock_guard lock(mu_);
  auto& it = item(item_id);
  if (it.status != ItemStatus::Queued) throw StateError("item " + std::to_string(item_id) + " is not queued");
  pending_.erase(std::find(pending_.begin(), pending_.end(), item_id));
  position = std::min(position, pending_.size());
  pending_.insert(pending_.begin() + static_cast<std::ptrdiff_t>(position), item_id);
}

void OperatorQueue::skip(std::uint64_t item_id) {
  std::lock_guard events(event_mu_);
  OperatorQueueItem copy;
  {
    std::lock_guard lock(mu_);
    auto& it = item(item_id);
    if (it.status != ItemStatus::Queued) throw StateError("item " + std::to_string(item_id) + " is not queued");
    it.status = ItemStatus::Skipped;
    pending_.erase(std::find(pending_.begin(), pending_.end(), item_id));
    copy = it;
  }
  emit(copy);
  cv_.notify_all();
}

bool OperatorQueue::stop() {
  std::lock_guard lock(mu_);
  if (!speaking_) return false;
  interrupt_ = true;
  return true;
}

std::vector<OperatorQueueItem> OperatorQueue::snapshot() const {
  std::lock_guard lock(mu_);
  std::vector<OperatorQueueItem> out;
  out.reserve(items_.size());
  for (const auto& [id, it] : items_) out.push_back(it);
  return out;
}

void OperatorQueue::wait_idle() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return (pending_.empty() && !speaking_) || shutting_down_; });
}

void OperatorQueue::shutdown() {
  {
    std::lock_guard lock(mu_);
    shutting_down_ = true;
    interrupt_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void OperatorQueue::worker() {
  while (true) {
    OperatorQueueItem current;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return shutting_down_ || !pending_.empty(); });
      if (shutting_down_) return;
    }
    {
      std::lock_guard events(event_mu_);
      {
        std::lock_guard lock(mu_);
        if (pending_.empty()) continue;  // skipped meanwhile
        auto id = pending_.front();
        pending_.pop_front();
        auto& it = items_.at(id);
        it.status = ItemStatus::Speaking;
        speaking_ = id;
        interrupt_ = false;
        current = it;
      }
      emit(current);
    }

    AudioClip clip;
    std::string error;
    try {
      clip = backend_->synthesize(SynthRequest{current.clean_text, current.style_id, seed_ + current.item_id});
    } catch (const std::exception& e) {
      error = e.what();
    }
    if (error.empty()) {
      try {
        player_->play(current, clip, interrupt_);
      } catch (const std::exception& e) {
        error = e.what();
      }
    }

    {
      std::lock_guard events(event_mu_);
      {
        std::lock_guard lock(mu_);
        auto& it = items_.at(current.item_id);
        if (error.empty()) {
          it.status = ItemStatus::Done;
          it.audio_seconds = clip.duration();
          if (clip.duration() > 0.0) it.rtf = compute_rtf(clip.duration(), clip.synth_wall_time);
          it.interrupted = interrupt_.load();
        } else {
          it.status = ItemStatus::Failed;
          it.error = error;
        }
        speaking_.reset();
        interrupt_ = false;
        current = it;
      }
      emit(current);
    }
    cv_.notify_all();
  }
}

}  // namespace emojivoice
