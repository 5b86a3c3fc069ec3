#include "emojivoice/agent.hpp"

#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "emojivoice/error.hpp"

namespace emojivoice {

std::string_view to_string(AgentState s) {
  switch (s) {
    case AgentState::Idle: return "idle";
    case AgentState::Recording: return "recording";
    case AgentState::Transcribing: return "transcribing";
    case AgentState::Thinking: return "thinking";
    case AgentState::Speaking: return "speaking";
  }
  return "idle";
}

std::string_view to_string(AgentEvent e) {
  switch (e) {
    case AgentEvent::Press: return "press";
    case AgentEvent::Release: return "release";
    case AgentEvent::Transcribed: return "transcribed";
    case AgentEvent::Replied: return "replied";
    case AgentEvent::Spoken: return "spoken";
    case AgentEvent::Abort: return "abort";
  }
  return "abort";
}

std::optional<AgentState> next_state(AgentState state, AgentEvent event) noexcept {
  using S = AgentState;
  using E = AgentEvent;
  if (event == E::Abort) return S::Idle;
  switch (state) {
    case S::Idle: if (event == E::Press) return S::Recording; break;
    case S::Recording: if (event == E::Release) return S::Transcribing; break;
    case S::Transcribing: if (event == E::Transcribed) return S::Thinking; break;
    case S::Thinking: if (event == E::Replied) return S::Speaking; break;
    case S::Speaking: if (event == E::Spoken) return S::Idle; break;
  }
  return std::nullopt;
}

HttpUrl parse_http_url(std::string_view url, const std::string& field) {
  constexpr std::string_view kScheme = "http://";
  if (url.substr(0, kScheme.size()) != kScheme) {
    throw ConfigError(field, "expected an http:// URL, got \"" + std::string(url) + "\"");
  }
  auto rest = url.substr(kScheme.size());
  HttpUrl out;
  const auto slash = rest.find('/');
  auto authority = rest.substr(0, slash);
  out.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  const auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    const auto port_text = std::string(authority.substr(colon + 1));
    char* end = nullptr;
    const long port = std::strtol(port_text.c_str(), &end, 10);
    if (port_text.empty() || *end != '\0' || port <= 0 || port > 65535) {
      throw ConfigError(field, "invalid port in \"" + std::string(url) + "\"");
    }
    out.port = static_cast<int>(port);
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) throw ConfigError(field, "missing host in \"" + std::string(url) + "\"");
  out.host = std::string(authority);
  return out;
}

void AgentConfig::validate() const {
  if (max_history_turns < 1) throw ConfigError("max_history_turns", "must be >= 1");
  parse_http_url(asr_endpoint, "asr_endpoint");
  parse_http_url(chat_endpoint, "chat_endpoint");
}

void AgentConfig::apply_environment() {
  if (asr_endpoint.empty()) {
    if (const char* v = std::getenv("EMOJIVOICE_ASR_URL")) asr_endpoint = v;
  }
  if (chat_endpoint.empty()) {
    if (const char* v = std::getenv("EMOJIVOICE_CHAT_URL")) chat_endpoint = v;
  }
}

ParsedReply parse_reply(std::string_view reply_raw, const StyleRegistry& registry) {
  auto extracted = extract_trailing_emoji(reply_raw);
  if (extracted.clean_text.empty()) throw EmptyReplyError("reply has no speakable text");
  const auto style = resolve(registry, extracted.emoji);
  return ParsedReply{std::move(extracted.clean_text), style.style_id, std::move(extracted.emoji),
                     style.fallback};
}

std::string default_system_prompt(const StyleRegistry& registry) {
  std::string emojis;
  for (const auto& e : registry.emoji_list()) {
    if (!emojis.empty()) emojis += ' ';
    emojis += e;
  }
  return "You are a friendly social robot talking with a person. Keep every reply to one or two "
         "short spoken sentences. End every reply with exactly one emoji, chosen from this list, "
         "that matches how the reply should sound: " +
         emojis +
         ". Put the emoji after the final punctuation and do not use any other emoji anywhere "
         "in the reply.";
}

namespace {

std::string post(const HttpUrl& url, double timeout, const std::string& body,
                 const std::string& content_type) {
  httplib::Client client(url.host, url.port);
  const auto secs = static_cast<time_t>(timeout);
  const auto usecs = static_cast<time_t>((timeout - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post(url.path, body, content_type);
  if (!res) {
    throw TransportError("POST http://" + url.host + ":" + std::to_string(url.port) + url.path +
                         " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("POST " + url.path + " returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

std::string json_field(const std::string& body, const char* field) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at(field).get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed response, expected {\"") + field + "\": ...}: " +
                         e.what());
  }
}

}  // namespace

HttpAsrClient::HttpAsrClient(std::string url, double timeout_seconds)
    : url_(parse_http_url(url, "asr_endpoint")), timeout_(timeout_seconds) {}

std::string HttpAsrClient::transcribe(const AudioClip& audio) {
  const auto wav = encode_wav(audio);
  return json_field(post(url_, timeout_, std::string(wav.begin(), wav.end()), "audio/wav"), "text");
}

HttpChatClient::HttpChatClient(std::string url, double timeout_seconds)
    : url_(parse_http_url(url, "chat_endpoint")), timeout_(timeout_seconds) {}

std::string HttpChatClient::reply(std::string_view system, std::span<const ChatMessage> messages) {
  nlohmann::json body;
  body["system"] = std::string(system);
  body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  return json_field(post(url_, timeout_, body.dump(), "application/json"), "reply");
}

namespace {

std::string next_scripted(std::deque<std::string>& responses, const char* what) {
  if (responses.empty()) throw TransportError(std::string(what) + " mock has no responses left");
  std::string r = std::move(responses.front());
  responses.pop_front();
  constexpr std::string_view kError = "!error:";
  if (std::string_view(r).substr(0, kError.size()) == kError) {
    throw TransportError(r.substr(kError.size()));
  }
  return r;
}

}  // namespace

ScriptedAsrClient::ScriptedAsrClient(std::vector<std::string> responses)
    : responses_(responses.begin(), responses.end()) {}

std::string ScriptedAsrClient::transcribe(const AudioClip&) {
  std::lock_guard lock(mu_);
  ++calls_;
  return next_scripted(responses_, "ASR");
}

std::size_t ScriptedAsrClient::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

ScriptedChatClient::ScriptedChatClient(std::vector<std::string> responses)
    : responses_(responses.begin(), responses.end()) {}

std::string ScriptedChatClient::reply(std::string_view system, std::span<const ChatMessage> messages) {
  std::lock_guard lock(mu_);
  ++calls_;
  last_system_ = std::string(system);
  last_messages_.assign(messages.begin(), messages.end());
  return next_scripted(responses_, "chat");
}

std::size_t ScriptedChatClient::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::vector<ChatMessage> ScriptedChatClient::last_messages() const {
  std::lock_guard lock(mu_);
  return last_messages_;
}

std::string ScriptedChatClient::last_system() const {
  std::lock_guard lock(mu_);
  return last_system_;
}

BufferCaptureDevice::BufferCaptureDevice(int sample_rate) { take_.sample_rate = sample_rate; }

void BufferCaptureDevice::start() {
  std::lock_guard lock(mu_);
  active_ = true;
  take_.samples.clear();
}

AudioClip BufferCaptureDevice::stop() {
  std::lock_guard lock(mu_);
  active_ = false;
  AudioClip out;
  out.sample_rate = take_.sample_rate;
  out.samples.swap(take_.samples);
  return out;
}

void BufferCaptureDevice::push(std::span<const float> samples) {
  std::lock_guard lock(mu_);
  if (active_) take_.samples.insert(take_.samples.end(), samples.begin(), samples.end());
}

void BufferCaptureDevice::push_pcm16(std::span<const std::uint8_t> bytes) {
  std::lock_guard lock(mu_);
  if (!active_) return;
  for (std::size_t i = 0; i + 1 < bytes.size(); i += 2) {
    const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(bytes[i] | (bytes[i + 1] << 8)));
    take_.samples.push_back(static_cast<float>(v) / 32767.0f);
  }
}

void BufferCaptureDevice::set_sample_rate(int sample_rate) {
  std::lock_guard lock(mu_);
  take_.sample_rate = sample_rate;
}

FileCaptureDevice::FileCaptureDevice(std::vector<std::filesystem::path> files)
    : files_(files.begin(), files.end()) {}

void FileCaptureDevice::start() {
  if (files_.empty()) throw IoError("<capture>", "no more audio files to capture");
}

AudioClip FileCaptureDevice::stop() {
  if (files_.empty()) throw IoError("<capture>", "no more audio files to capture");
  auto path = std::move(files_.front());
  files_.pop_front();
  return read_wav(path);
}

AgentSession::AgentSession(AgentConfig config, std::shared_ptr<const StyleRegistry> registry,
                           std::unique_ptr<AsrClient> asr, std::unique_ptr<ChatClient> chat,
                           std::unique_ptr<SynthBackend> backend,
                           std::unique_ptr<CaptureDevice> capture, TurnObserver observer)
    : config_(std::move(config)),
      registry_(std::move(registry)),
      asr_(std::move(asr)),
      chat_(std::move(chat)),
      backend_(std::move(backend)),
      capture_(std::move(capture)),
      observer_(std::move(observer)) {
  if (!registry_ || !asr_ || !chat_ || !backend_ || !capture_) {
    throw PreconditionError("agent session needs a registry, clients, a backend and a capture device");
  }
  if (config_.max_history_turns < 1) throw ConfigError("max_history_turns", "must be >= 1");
  system_prompt_ = config_.system_prompt.empty() ? default_system_prompt(*registry_) : config_.system_prompt;
}

AgentState AgentSession::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

void AgentSession::apply(AgentEvent event) {
  AgentState now;
  {
    std::lock_guard lock(mu_);
    const auto next = next_state(state_, event);
    if (!next) {
      throw StateError(std::string("event '") + std::string(to_string(event)) +
                       "' not allowed while " + std::string(to_string(state_)));
    }
    state_ = *next;
    if (event == AgentEvent::Abort) ++abort_generation_;
    now = state_;
  }
  if (observer_.on_state) observer_.on_state(now);
}

bool AgentSession::aborted_since(std::uint64_t generation) const {
  std::lock_guard lock(mu_);
  return abort_generation_ != generation;
}

void AgentSession::press_talk() {
  {
    std::lock_guard lock(mu_);
    if (state_ != AgentState::Idle) {
      throw StateError("press not allowed while " + std::string(to_string(state_)));
    }
  }
  capture_->start();
  apply(AgentEvent::Press);
}

AudioClip AgentSession::release_talk() {
  {
    std::lock_guard lock(mu_);
    if (state_ != AgentState::Recording) {
      throw StateError("release not allowed while " + std::string(to_string(state_)));
    }
  }
  auto take = capture_->stop();
  apply(AgentEvent::Release);
  return take;
}

void AgentSession::abort() { apply(AgentEvent::Abort); }

TurnResult AgentSession::abort_turn(std::string error) {
  spdlog::warn("turn aborted: {}", error);
  apply(AgentEvent::Abort);
  return TurnResult{TurnStatus::Aborted, std::nullopt, std::move(error)};
}

TurnResult AgentSession::run_turn(const AudioClip& captured_audio) {
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t) {
    return std::chrono::duration<double, std::milli>(clock::now() - t).count();
  };

  std::uint64_t generation;
  {
    std::lock_guard lock(mu_);
    if (state_ != AgentState::Transcribing) {
      throw StateError("run_turn requires the transcribing state, session is " +
                       std::string(to_string(state_)));
    }
    generation = abort_generation_;
  }

  TurnRecord rec;
  auto t = clock::now();
  try {
    rec.user_text = asr_->transcribe(captured_audio);
  } catch (const std::exception& e) {
    return abort_turn(std::string("ASR failed: ") + e.what());
  }
  rec.timings.asr_ms = ms_since(t);
  if (aborted_since(generation)) return {TurnStatus::Aborted, std::nullopt, "aborted"};
  if (rec.user_text.find_first_not_of(" \t\r\n") == std::string::npos) {
    return abort_turn("empty transcript");
  }
  if (observer_.on_transcript) observer_.on_transcript(rec.user_text);
  apply(AgentEvent::Transcribed);

  std::vector<ChatMessage> messages;
  {
    std::lock_guard lock(mu_);
    for (const auto& h : history_) {
      messages.push_back({"user", h.user_text});
      messages.push_back({"assistant", h.reply_raw});
    }
  }
  messages.push_back({"user", rec.user_text});
  t = clock::now();
  try {
    rec.reply_raw = chat_->reply(system_prompt_, messages);
  } catch (const std::exception& e) {
    return abort_turn(std::string("chat failed: ") + e.what());
  }
  rec.timings.chat_ms = ms_since(t);
  if (aborted_since(generation)) return {TurnStatus::Aborted, std::nullopt, "aborted"};

  try {
    auto parsed = parse_reply(rec.reply_raw, *registry_);
    rec.reply_clean = std::move(parsed.clean);
    rec.reply_emoji = std::move(parsed.emoji);
    rec.resolved_style = parsed.style_id;
    rec.fallback = parsed.fallback;
  } catch (const EmptyReplyError& e) {
    return abort_turn(e.what());
  }
  if (rec.fell_back()) {
    spdlog::info("reply without a usable trailing emoji ({}), using default style {}",
                 to_string(rec.fallback), rec.resolved_style);
  }
  if (observer_.on_reply) observer_.on_reply(rec);
  apply(AgentEvent::Replied);

  t = clock::now();
  std::optional<AudioClip> clip;
  try {
    clip = backend_->synthesize({rec.reply_clean, rec.resolved_style, seed_++});
  } catch (const std::exception& e) {
    rec.audio_ok = false;
    rec.audio_error = e.what();
    spdlog::error("synthesis failed, reply was: {} ({})", rec.reply_clean, e.what());
  }
  rec.timings.tts_ms = ms_since(t);
  if (clip && observer_.on_audio && !aborted_since(generation)) observer_.on_audio(*clip, rec);

  {
    std::lock_guard lock(mu_);
    if (abort_generation_ != generation) return {TurnStatus::Aborted, std::nullopt, "aborted"};
    history_.push_back(rec);
    while (history_.size() > config_.max_history_turns) history_.pop_front();
  }
  apply(AgentEvent::Spoken);
  return TurnResult{TurnStatus::Completed, std::move(rec), {}};
}

std::vector<TurnRecord> AgentSession::history() const {
  std::lock_guard lock(mu_);
  return {history_.begin(), history_.end()};
}

}  // namespace emojivoice
