#pragma once

// Push-to-talk speech-to-speech agent: capture -> ASR -> chat model ->
// trailing-emoji extraction -> synthesis.

#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emojivoice/audio.hpp"
#include "emojivoice/emoji_text.hpp"
#include "emojivoice/synth.hpp"
#include "emojivoice/voice_registry.hpp"

namespace emojivoice {

enum class AgentState { Idle, Recording, Transcribing, Thinking, Speaking };
enum class AgentEvent { Press, Release, Transcribed, Replied, Spoken, Abort };

std::string_view to_string(AgentState s);
std::string_view to_string(AgentEvent e);

// The transition table. nullopt means the event is not allowed in that state.
std::optional<AgentState> next_state(AgentState state, AgentEvent event) noexcept;

inline constexpr std::size_t kDefaultMaxHistoryTurns = 16;

struct AgentConfig {
  std::string system_prompt;  // empty: generated from the registry
  std::string speaker;        // registry name; empty selects the default
  std::size_t max_history_turns = kDefaultMaxHistoryTurns;
  std::string asr_endpoint;   // http://host:port/path
  std::string chat_endpoint;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // Fills empty endpoints from EMOJIVOICE_ASR_URL / EMOJIVOICE_CHAT_URL.
  void apply_environment();
};

struct HttpUrl {
  std::string host;
  int port = 80;
  std::string path = "/";
};

// Only plain http:// URLs. Throws ConfigError(field).
HttpUrl parse_http_url(std::string_view url, const std::string& field = "url");

struct TurnTimings {
  double asr_ms = 0.0;
  double chat_ms = 0.0;
  double tts_ms = 0.0;
};

struct TurnRecord {
  std::string user_text;
  std::string reply_raw;
  std::string reply_clean;
  std::optional<EmojiToken> reply_emoji;
  int resolved_style = 0;
  Fallback fallback = Fallback::None;
  TurnTimings timings;
  bool audio_ok = true;
  std::string audio_error;

  bool fell_back() const noexcept { return fallback != Fallback::None; }
};

struct ParsedReply {
  std::string clean;
  int style_id = 0;
  std::optional<EmojiToken> emoji;
  Fallback fallback = Fallback::None;
};

// Throws EmptyReplyError when the reply has no speakable text.
ParsedReply parse_reply(std::string_view reply_raw, const StyleRegistry& registry);

// Instructs the chat model to close every reply with one registry emoji.
std::string default_system_prompt(const StyleRegistry& registry);

struct ChatMessage {
  std::string role;  // "user" | "assistant"
  std::string content;
};

class AsrClient {
 public:
  virtual ~AsrClient() = default;
  // Throws TransportError.
  virtual std::string transcribe(const AudioClip& audio) = 0;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Throws TransportError.
  virtual std::string reply(std::string_view system, std::span<const ChatMessage> messages) = 0;
};

// POST <url> with the WAV bytes (audio/wav) -> {"text": "..."}
class HttpAsrClient final : public AsrClient {
 public:
  explicit HttpAsrClient(std::string url, double timeout_seconds = 30.0);
  std::string transcribe(const AudioClip& audio) override;

 private:
  HttpUrl url_;
  double timeout_;
};

// POST <url> {"system": "...", "messages": [{"role","content"}...]} -> {"reply": "..."}
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(std::string url, double timeout_seconds = 60.0);
  std::string reply(std::string_view system, std::span<const ChatMessage> messages) override;

 private:
  HttpUrl url_;
  double timeout_;
};

// Replays canned responses in order; an entry starting with "!error:"
// throws TransportError with the rest as message. Records every call.
class ScriptedAsrClient final : public AsrClient {
 public:
  explicit ScriptedAsrClient(std::vector<std::string> responses);
  std::string transcribe(const AudioClip& audio) override;
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::deque<std::string> responses_;
  std::size_t calls_ = 0;
};

class ScriptedChatClient final : public ChatClient {
 public:
  explicit ScriptedChatClient(std::vector<std::string> responses);
  std::string reply(std::string_view system, std::span<const ChatMessage> messages) override;
  std::size_t calls() const;
  // Messages of the most recent call.
  std::vector<ChatMessage> last_messages() const;
  std::string last_system() const;

 private:
  mutable std::mutex mu_;
  std::deque<std::string> responses_;
  std::size_t calls_ = 0;
  std::vector<ChatMessage> last_messages_;
  std::string last_system_;
};

// Audio capture device. start() begins a take, stop() ends it.
class CaptureDevice {
 public:
  virtual ~CaptureDevice() = default;
  virtual void start() = 0;
  virtual AudioClip stop() = 0;
};

// Collects PCM pushed from elsewhere (a socket, a test).
class BufferCaptureDevice final : public CaptureDevice {
 public:
  explicit BufferCaptureDevice(int sample_rate = 16000);
  void start() override;
  AudioClip stop() override;
  void push(std::span<const float> samples);
  void push_pcm16(std::span<const std::uint8_t> little_endian_bytes);
  void set_sample_rate(int sample_rate);

 private:
  std::mutex mu_;
  bool active_ = false;
  AudioClip take_;
};

// Each take returns the next WAV file in the list.
class FileCaptureDevice final : public CaptureDevice {
 public:
  explicit FileCaptureDevice(std::vector<std::filesystem::path> files);
  void start() override;
  AudioClip stop() override;

 private:
  std::deque<std::filesystem::path> files_;
};

enum class TurnStatus { Completed, Aborted };

struct TurnResult {
  TurnStatus status = TurnStatus::Aborted;
  std::optional<TurnRecord> record;
  std::string error;
};

// Hooks the session calls while a turn progresses; all optional.
struct TurnObserver {
  std::function<void(const std::string& transcript)> on_transcript;
  std::function<void(const TurnRecord& partial)> on_reply;
  // Blocks for the duration of playback.
  std::function<void(const AudioClip& clip, const TurnRecord& record)> on_audio;
  std::function<void(AgentState)> on_state;
};

// One conversation. Logically single-threaded; abort() may be called from
// another thread and takes effect at the next step boundary.
class AgentSession {
 public:
  AgentSession(AgentConfig config, std::shared_ptr<const StyleRegistry> registry,
               std::unique_ptr<AsrClient> asr, std::unique_ptr<ChatClient> chat,
               std::unique_ptr<SynthBackend> backend, std::unique_ptr<CaptureDevice> capture,
               TurnObserver observer = {});

  AgentState state() const;
  // Idle -> Recording. Throws StateError otherwise.
  void press_talk();
  // Recording -> Transcribing; returns the captured take.
  AudioClip release_talk();
  // Requires Transcribing. Always leaves the session Idle.
  TurnResult run_turn(const AudioClip& captured_audio);
  // Any state -> Idle.
  void abort();

  std::vector<TurnRecord> history() const;
  const std::string& system_prompt() const noexcept { return system_prompt_; }
  const AgentConfig& config() const noexcept { return config_; }
  CaptureDevice& capture() noexcept { return *capture_; }

 private:
  void apply(AgentEvent event);
  bool aborted_since(std::uint64_t generation) const;
  TurnResult abort_turn(std::string error);

  AgentConfig config_;
  std::shared_ptr<const StyleRegistry> registry_;
  std::unique_ptr<AsrClient> asr_;
  std::unique_ptr<ChatClient> chat_;
  std::unique_ptr<SynthBackend> backend_;
  std::unique_ptr<CaptureDevice> capture_;
  TurnObserver observer_;
  std::string system_prompt_;

  mutable std::mutex mu_;
  AgentState state_ = AgentState::Idle;
  std::uint64_t abort_generation_ = 0;
  std::deque<TurnRecord> history_;
  std::uint64_t seed_ = 0;
};

}  // namespace emojivoice
