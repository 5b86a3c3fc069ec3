#include "emojivoice/server.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "emojivoice/audio.hpp"
#include "emojivoice/emoji_text.hpp"
#include "emojivoice/error.hpp"
#include "emojivoice/fs_util.hpp"

namespace emojivoice::server {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using json = nlohmann::ordered_json;

namespace {

std::string format_seconds(double v) { return fmt::format("{:.6f}", v); }

json error_body(std::string_view message) { return json{{"error", message}}; }

HttpReply json_reply(int status, const json& body) {
  HttpReply r;
  r.status = status;
  r.body = body.dump();
  return r;
}

struct Target {
  std::string path;
  std::vector<std::pair<std::string, std::string>> query;

  std::string param(std::string_view key) const {
    for (const auto& [k, v] : query)
      if (k == key) return v;
    return {};
  }
};

std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      auto hex = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
      };
      int hi = hex(s[i + 1]);
      int lo = hex(s[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
        continue;
      }
    }
    out.push_back(s[i] == '+' ? ' ' : s[i]);
  }
  return out;
}

Target parse_target(std::string_view target) {
  Target t;
  auto q = target.find('?');
  t.path = std::string(target.substr(0, q));
  if (q == std::string_view::npos) return t;
  std::string_view rest = target.substr(q + 1);
  while (!rest.empty()) {
    auto amp = rest.find('&');
    std::string_view kv = rest.substr(0, amp);
    auto eq = kv.find('=');
    t.query.emplace_back(percent_decode(kv.substr(0, eq)),
                         eq == std::string_view::npos ? std::string() : percent_decode(kv.substr(eq + 1)));
    if (amp == std::string_view::npos) break;
    rest = rest.substr(amp + 1);
  }
  return t;
}

std::string_view mime_type(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".wav") return "audio/wav";
  return "application/octet-stream";
}

bool is_loopback(const std::string& address) {
  boost::system::error_code ec;
  auto a = net::ip::make_address(address, ec);
  return !ec && a.is_loopback();
}

}  // namespace

void ServerOptions::validate() const {
  boost::system::error_code ec;
  net::ip::make_address(bind_address, ec);
  if (ec) throw ConfigError("bind_address", "not an IP address: " + bind_address);
  if (!is_loopback(bind_address) && !allow_external)
    throw ConfigError("bind_address", "binding to a non-loopback address needs allow_external");
  if (threads < 1) throw ConfigError("threads", "must be at least 1");
  if (console_dir && !std::filesystem::is_directory(*console_dir))
    throw ConfigError("console_dir", "not a directory: " + console_dir->string());
}

RegistrySet build_registry_set(std::span<const std::filesystem::path> files, bool include_shipped) {
  RegistrySet set;
  if (include_shipped) set = RegistrySet::shipped();
  for (const auto& f : files) {
    try {
      set.add(load_registry_file(f));
    } catch (const EmptyRegistryError&) {
      spdlog::warn("registry {} has no styles; not listed", f.string());
    }
  }
  return set;
}

json voices_json(const RegistrySet& registries) {
  json speakers = json::array();
  for (const auto& name : registries.speakers()) {
    auto reg = registries.get(name);
    json styles = json::array();
    for (const auto& s : reg->styles())
      styles.push_back(json{{"style_id", s.style_id}, {"emoji", s.emoji.utf8()}, {"name", s.name}});
    speakers.push_back(json{{"speaker", name}, {"default_style_id", reg->default_style_id()}, {"styles", styles}});
  }
  return json{{"v", kProtocolVersion}, {"speakers", speakers}};
}

json item_json(const OperatorQueueItem& item) {
  json j{{"item_id", item.item_id},      {"text", item.clean_text},
         {"emoji", item.emoji},          {"style_id", item.style_id},
         {"fallback", to_string(item.fallback)}, {"status", to_string(item.status)},
         {"interrupted", item.interrupted}};
  j["rtf"] = item.rtf ? json(*item.rtf) : json(nullptr);
  j["audio_seconds"] = item.audio_seconds ? json(*item.audio_seconds) : json(nullptr);
  if (!item.error.empty()) j["error"] = item.error;
  return j;
}

json turn_record_json(const TurnRecord& r) {
  json j{{"user_text", r.user_text},
         {"reply_raw", r.reply_raw},
         {"reply_clean", r.reply_clean},
         {"reply_emoji", r.reply_emoji ? json(r.reply_emoji->utf8()) : json(nullptr)},
         {"resolved_style", r.resolved_style},
         {"fallback", to_string(r.fallback)},
         {"timings", {{"asr_ms", r.timings.asr_ms}, {"chat_ms", r.timings.chat_ms}, {"tts_ms", r.timings.tts_ms}}},
         {"audio_ok", r.audio_ok}};
  if (!r.audio_ok) j["audio_error"] = r.audio_error;
  return j;
}

HttpReply handle_synthesize(std::string_view body, const RegistrySet& registries, const BackendFactory& backends,
                            std::uint64_t default_seed) {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error&) {
    return json_reply(400, error_body("body is not JSON"));
  }
  if (!req.is_object() || !req.contains("text") || !req["text"].is_string())
    return json_reply(400, error_body("'text' must be a string"));
  std::string speaker;
  if (req.contains("speaker")) {
    if (!req["speaker"].is_string()) return json_reply(400, error_body("'speaker' must be a string"));
    speaker = req["speaker"].get<std::string>();
  }
  std::uint64_t seed = default_seed;
  if (req.contains("seed")) {
    if (!req["seed"].is_number_unsigned()) return json_reply(400, error_body("'seed' must be a non-negative integer"));
    seed = req["seed"].get<std::uint64_t>();
  }

  TrailingEmoji parsed;
  try {
    parsed = extract_trailing_emoji(req["text"].get<std::string>());
  } catch (const DecodeError& e) {
    return json_reply(400, error_body(e.what()));
  }
  if (parsed.clean_text.empty()) return json_reply(400, error_body("no speakable text"));

  std::shared_ptr<const StyleRegistry> registry;
  try {
    registry = registries.get(speaker);
  } catch (const StyleError&) {
    return json_reply(404, error_body("unknown speaker: " + speaker));
  }
  StyleResolution res = resolve(*registry, parsed.emoji);

  AudioClip clip;
  try {
    auto backend = backends(registry);
    clip = backend->synthesize(SynthRequest{parsed.clean_text, res.style_id, seed});
  } catch (const TransportError& e) {
    return json_reply(502, error_body(e.what()));
  } catch (const std::exception& e) {
    return json_reply(500, error_body(e.what()));
  }
  if (clip.duration() <= 0.0) return json_reply(500, error_body("backend returned no audio"));

  HttpReply r;
  r.content_type = "audio/wav";
  auto wav = encode_wav(clip);
  r.body.assign(wav.begin(), wav.end());
  r.headers = {{"X-EmojiVoice-Speaker", registry->speaker_name()},
               {"X-EmojiVoice-Style-Id", std::to_string(res.style_id)},
               {"X-EmojiVoice-Fallback", std::string(to_string(res.fallback))},
               {"X-EmojiVoice-Audio-Seconds", format_seconds(clip.duration())},
               {"X-EmojiVoice-Synth-Seconds", format_seconds(clip.synth_wall_time)},
               {"X-EmojiVoice-RTF", format_seconds(compute_rtf(clip.duration(), clip.synth_wall_time))}};
  return r;
}

// ---------------------------------------------------------------------------

class Closable {
 public:
  virtual ~Closable() = default;
  virtual void shutdown() = 0;
};

struct Server::Impl {
  ServerOptions options;
  RegistrySet registries;
  BackendFactory backends;
  AgentFactories agent;

  net::io_context ioc;
  std::optional<tcp::acceptor> acceptor;
  std::vector<std::thread> threads;
  std::uint16_t port = 0;

  std::mutex mu;
  std::condition_variable cv;
  bool running = false;
  bool stopped = false;
  std::vector<std::weak_ptr<Closable>> sessions;

  void track(const std::shared_ptr<Closable>& s) {
    std::lock_guard lock(mu);
    std::erase_if(sessions, [](const auto& w) { return w.expired(); });
    sessions.push_back(s);
  }

  http::response<http::string_body> handle(const http::request<http::string_body>& req);
};

namespace {

class WsSession : public Closable, public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, Server::Impl& server) : server_(server), ws_(std::move(socket)) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(16 * 1024 * 1024);
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

  void send_json(json message) {
    message["v"] = kProtocolVersion;
    post_out(false, message.dump());
  }

  void send_binary(std::vector<std::uint8_t> bytes) { post_out(true, std::string(bytes.begin(), bytes.end())); }

  void shutdown() override {
    stop_workers();
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      if (self->closed_) return;
      self->closed_ = true;
      beast::error_code ec;
      beast::get_lowest_layer(self->ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
      beast::get_lowest_layer(self->ws_).socket().close(ec);
    });
  }

 protected:
  virtual void on_open() = 0;
  virtual void on_text(const std::string& text) = 0;
  virtual void on_binary(const std::string& data) = 0;
  // Joins background threads; must be idempotent.
  virtual void stop_workers() = 0;

  void send_error(std::string_view code, std::string_view message) {
    send_json(json{{"type", "error"}, {"code", code}, {"message", message}});
  }

  Server::Impl& server_;

 private:
  struct Out {
    bool binary;
    std::string data;
  };

  void post_out(bool binary, std::string data) {
    net::post(ws_.get_executor(), [self = shared_from_this(), binary, data = std::move(data)]() mutable {
      if (self->closed_) return;
      self->outbox_.push_back(Out{binary, std::move(data)});
      if (self->outbox_.size() == 1) self->do_write();
    });
  }

  void do_write() {
    ws_.binary(outbox_.front().binary);
    ws_.async_write(net::buffer(outbox_.front().data),
                    beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      outbox_.clear();
      return;
    }
    outbox_.pop_front();
    if (!outbox_.empty()) do_write();
  }

  void on_accept(beast::error_code ec) {
    if (ec) {
      spdlog::warn("websocket handshake failed: {}", ec.message());
      return;
    }
    on_open();
    do_read();
  }

  void do_read() { ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      closed_ = true;
      outbox_.clear();
      // Worker threads may post to this strand; join them elsewhere.
      std::thread([self = shared_from_this()] { self->stop_workers(); }).detach();
      return;
    }
    bool binary = ws_.got_binary();
    std::string data = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    try {
      if (binary)
        on_binary(data);
      else
        on_text(data);
    } catch (const std::exception& e) {
      send_error("internal", e.what());
    }
    do_read();
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<Out> outbox_;
  bool closed_ = false;
};

std::optional<json> parse_message(const std::string& text, std::string& error) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error&) {
    error = "message is not JSON";
    return std::nullopt;
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
    error = "message needs a string 'type'";
    return std::nullopt;
  }
  return msg;
}

class OperatorSession;

class WsClipPlayer final : public ClipPlayer {
 public:
  WsClipPlayer(std::weak_ptr<WsSession> session, bool realtime) : session_(std::move(session)), realtime_(realtime) {}

  void play(const OperatorQueueItem& item, const AudioClip& clip, const std::atomic<bool>& interrupt) override {
    if (auto s = session_.lock()) {
      s->send_json(json{{"type", "audio"}, {"item_id", item.item_id}, {"audio_seconds", clip.duration()}});
      s->send_binary(encode_wav(clip));
    }
    if (!realtime_) return;
    auto end = std::chrono::steady_clock::now() + std::chrono::duration<double>(clip.duration());
    while (!interrupt && std::chrono::steady_clock::now() < end)
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }

 private:
  std::weak_ptr<WsSession> session_;
  bool realtime_;
};

class OperatorSession final : public WsSession {
 public:
  OperatorSession(tcp::socket socket, Server::Impl& server, std::shared_ptr<const StyleRegistry> registry)
      : WsSession(std::move(socket), server), registry_(std::move(registry)) {}

 protected:
  void on_open() override {
    std::weak_ptr<WsSession> weak = shared_from_this();
    auto player = std::make_shared<WsClipPlayer>(weak, server_.options.realtime_playback);
    auto on_event = [weak](const OperatorQueueItem& item) {
      if (auto s = weak.lock()) s->send_json(json{{"type", "item"}, {"item", item_json(item)}});
    };
    {
      std::lock_guard lock(mu_);
      queue_ = std::make_shared<OperatorQueue>(registry_, server_.backends(registry_), player, on_event,
                                               server_.options.seed);
    }
    send_json(json{{"type", "hello"}, {"session", "operator"}, {"speaker", registry_->speaker_name()}});
  }

  void on_text(const std::string& text) override {
    std::string err;
    auto msg = parse_message(text, err);
    if (!msg) return send_error("malformed", err);
    const json& m = *msg;
    std::string type = m["type"].get<std::string>();
    json ref = m.contains("ref") ? m["ref"] : json(nullptr);
    std::shared_ptr<OperatorQueue> queue;
    {
      std::lock_guard lock(mu_);
      queue = queue_;
    }
    if (!queue) return send_error("closed", "session is shutting down");
    auto need_id = [&]() -> std::optional<std::uint64_t> {
      if (!m.contains("item_id") || !m["item_id"].is_number_unsigned()) return std::nullopt;
      return m["item_id"].get<std::uint64_t>();
    };
    try {
      if (type == "enqueue") {
        if (!m.contains("text") || !m["text"].is_string()) return send_error("malformed", "enqueue needs 'text'");
        std::string emoji;
        if (m.contains("emoji") && !m["emoji"].is_null()) {
          if (!m["emoji"].is_string()) return send_error("malformed", "'emoji' must be a string");
          emoji = m["emoji"].get<std::string>();
        }
        auto id = queue->enqueue(m["text"].get<std::string>(), emoji);
        send_json(json{{"type", "enqueued"}, {"ref", ref}, {"item_id", id}});
      } else if (type == "reorder") {
        auto id = need_id();
        if (!id || !m.contains("position") || !m["position"].is_number_unsigned())
          return send_error("malformed", "reorder needs 'item_id' and 'position'");
        queue->reorder(*id, m["position"].get<std::size_t>());
        send_queue(*queue);
      } else if (type == "skip") {
        auto id = need_id();
        if (!id) return send_error("malformed", "skip needs 'item_id'");
        queue->skip(*id);
      } else if (type == "stop") {
        bool stopped = queue->stop();
        send_json(json{{"type", "stopped"}, {"ref", ref}, {"interrupted", stopped}});
      } else if (type == "snapshot") {
        send_queue(*queue);
      } else {
        send_error("malformed", "unknown message type: " + type);
      }
    } catch (const PreconditionError& e) {
      send_error("rejected", e.what());
    } catch (const StateError& e) {
      send_error("rejected", e.what());
    } catch (const DecodeError& e) {
      send_error("malformed", e.what());
    }
  }

  void on_binary(const std::string&) override { send_error("malformed", "operator sessions take no binary frames"); }

  void stop_workers() override {
    std::shared_ptr<OperatorQueue> q;
    {
      std::lock_guard lock(mu_);
      q = std::move(queue_);
    }
    if (q) q->shutdown();
  }

 private:
  void send_queue(const OperatorQueue& queue) {
    json items = json::array();
    for (const auto& it : queue.snapshot()) items.push_back(item_json(it));
    send_json(json{{"type", "queue"}, {"items", items}});
  }

  std::shared_ptr<const StyleRegistry> registry_;
  std::mutex mu_;
  std::shared_ptr<OperatorQueue> queue_;
};

class AgentWsSession final : public WsSession {
 public:
  AgentWsSession(tcp::socket socket, Server::Impl& server, std::shared_ptr<const StyleRegistry> registry)
      : WsSession(std::move(socket), server), registry_(std::move(registry)) {}
  ~AgentWsSession() override { stop_workers(); }

 protected:
  void on_open() override {
    std::weak_ptr<WsSession> weak = shared_from_this();
    TurnObserver obs;
    obs.on_transcript = [weak](const std::string& text) {
      if (auto s = weak.lock()) s->send_json(json{{"type", "transcript"}, {"text", text}});
    };
    obs.on_reply = [weak](const TurnRecord& r) {
      if (auto s = weak.lock())
        s->send_json(json{{"type", "reply"},
                          {"text", r.reply_raw},
                          {"clean", r.reply_clean},
                          {"emoji", r.reply_emoji ? json(r.reply_emoji->utf8()) : json(nullptr)},
                          {"style_id", r.resolved_style},
                          {"fallback", to_string(r.fallback)}});
    };
    obs.on_audio = [weak](const AudioClip& clip, const TurnRecord&) {
      if (auto s = weak.lock()) {
        s->send_json(json{{"type", "audio_start"},
                          {"sample_rate", clip.sample_rate},
                          {"audio_seconds", clip.duration()},
                          {"rtf", compute_rtf(clip.duration(), clip.synth_wall_time)}});
        s->send_binary(encode_wav(clip));
        s->send_json(json{{"type", "audio_end"}});
      }
    };
    obs.on_state = [weak](AgentState st) {
      if (auto s = weak.lock()) s->send_json(json{{"type", "state"}, {"state", to_string(st)}});
    };
    AgentConfig cfg = server_.agent.config;
    cfg.speaker = registry_->speaker_name();
    session_ = std::make_unique<AgentSession>(cfg, registry_, server_.agent.asr(), server_.agent.chat(),
                                              server_.backends(registry_), std::make_unique<BufferCaptureDevice>(),
                                              std::move(obs));
    send_json(json{{"type", "hello"}, {"session", "agent"}, {"speaker", registry_->speaker_name()}});
  }

  void on_text(const std::string& text) override {
    std::string err;
    auto msg = parse_message(text, err);
    if (!msg) return send_error("malformed", err);
    const json& m = *msg;
    std::string type = m["type"].get<std::string>();
    if (type == "press") {
      auto& capture = static_cast<BufferCaptureDevice&>(session_->capture());
      if (m.contains("sample_rate")) {
        if (!m["sample_rate"].is_number_unsigned() || m["sample_rate"].get<int>() <= 0)
          return send_error("malformed", "'sample_rate' must be a positive integer");
        if (session_->state() == AgentState::Idle) capture.set_sample_rate(m["sample_rate"].get<int>());
      }
      try {
        session_->press_talk();
      } catch (const StateError& e) {
        send_error("protocol", e.what());
      }
    } else if (type == "release") {
      if (session_->state() != AgentState::Recording) return send_error("protocol", "release without press");
      AudioClip take = session_->release_talk();
      join_turn();
      std::weak_ptr<WsSession> weak = shared_from_this();
      AgentSession* session = session_.get();
      std::lock_guard lock(mu_);
      turn_thread_ = std::thread([weak, session, take = std::move(take)] {
        TurnResult r = session->run_turn(take);
        auto s = weak.lock();
        if (!s) return;
        if (r.status == TurnStatus::Completed && r.record) {
          if (!r.record->audio_ok)
            s->send_json(json{{"type", "turn_error"}, {"stage", "synthesis"}, {"message", r.record->audio_error}});
          s->send_json(json{{"type", "turn_end"}, {"record", turn_record_json(*r.record)}});
        } else {
          s->send_json(json{{"type", "turn_error"}, {"message", r.error}});
        }
      });
    } else if (type == "abort") {
      session_->abort();
    } else if (type == "history") {
      json turns = json::array();
      for (const auto& r : session_->history()) turns.push_back(turn_record_json(r));
      send_json(json{{"type", "history"}, {"turns", turns}});
    } else {
      send_error("malformed", "unknown message type: " + type);
    }
  }

  void on_binary(const std::string& data) override {
    if (session_->state() != AgentState::Recording) return send_error("protocol", "audio outside press/release");
    if (data.size() % 2 != 0) return send_error("malformed", "PCM16 frames need an even byte count");
    auto& capture = static_cast<BufferCaptureDevice&>(session_->capture());
    capture.push_pcm16(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
  }

  void stop_workers() override {
    if (session_) session_->abort();
    join_turn();
  }

 private:
  void join_turn() {
    std::thread t;
    {
      std::lock_guard lock(mu_);
      t = std::move(turn_thread_);
    }
    if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
    else if (t.joinable()) t.detach();
  }

  std::shared_ptr<const StyleRegistry> registry_;
  std::unique_ptr<AgentSession> session_;
  std::mutex mu_;
  std::thread turn_thread_;
};

http::response<http::string_body> make_response(const http::request<http::string_body>& req, const HttpReply& r) {
  http::response<http::string_body> res{static_cast<http::status>(r.status), req.version()};
  res.set(http::field::server, "emojivoice");
  res.set(http::field::content_type, r.content_type);
  for (const auto& [k, v] : r.headers) res.set(k, v);
  res.keep_alive(req.keep_alive());
  res.body() = r.body;
  res.prepare_payload();
  return res;
}

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, Server::Impl* server) : stream_(std::move(socket)), server_(server) {}

  void run() { net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this())); }

 private:
  void do_read() {
    parser_.emplace();
    parser_->body_limit(16 * 1024 * 1024);
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, *parser_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    auto req = parser_->release();
    if (websocket::is_upgrade(req)) return upgrade(std::move(req));
    auto res = std::make_shared<http::response<http::string_body>>(server_->handle(req));
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (res->need_eof()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->do_read();
    });
  }

  void upgrade(http::request<http::string_body> req) {
    Target t = parse_target(std::string_view(req.target().data(), req.target().size()));
    auto reject = [&](int status, std::string_view msg) {
      auto res = std::make_shared<http::response<http::string_body>>(make_response(req, json_reply(status, error_body(msg))));
      res->keep_alive(false);
      http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      });
    };
    if (t.path != "/v1/operator" && t.path != "/v1/agent") return reject(404, "no websocket endpoint here");
    std::shared_ptr<const StyleRegistry> registry;
    try {
      registry = server_->registries.get(t.param("speaker"));
    } catch (const StyleError&) {
      return reject(404, "unknown speaker: " + t.param("speaker"));
    }
    stream_.expires_never();
    std::shared_ptr<WsSession> session;
    if (t.path == "/v1/operator") {
      session = std::make_shared<OperatorSession>(stream_.release_socket(), *server_, registry);
    } else {
      if (!server_->agent.asr || !server_->agent.chat) return reject(503, "agent endpoints are not configured");
      session = std::make_shared<AgentWsSession>(stream_.release_socket(), *server_, registry);
    }
    server_->track(session);
    session->run(std::move(req));
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
  Server::Impl* server_;
};

void do_accept(Server::Impl* impl) {
  impl->acceptor->async_accept(net::make_strand(impl->ioc), [impl](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (!impl->acceptor->is_open() || ec == net::error::operation_aborted) return;
      spdlog::warn("accept failed: {}", ec.message());
    } else {
      std::make_shared<HttpSession>(std::move(socket), impl)->run();
    }
    do_accept(impl);
  });
}

}  // namespace

http::response<http::string_body> Server::Impl::handle(const http::request<http::string_body>& req) {
  Target t = parse_target(std::string_view(req.target().data(), req.target().size()));
  try {
    if (t.path == "/v1/voices") {
      if (req.method() != http::verb::get) return make_response(req, json_reply(405, error_body("use GET")));
      return make_response(req, json_reply(200, voices_json(registries)));
    }
    if (t.path == "/v1/synthesize") {
      if (req.method() != http::verb::post) return make_response(req, json_reply(405, error_body("use POST")));
      return make_response(req, handle_synthesize(req.body(), registries, backends, options.seed));
    }
    if (t.path == "/v1/health") return make_response(req, json_reply(200, json{{"ok", true}}));
    if (options.console_dir && (t.path == "/console" || t.path.starts_with("/console/"))) {
      if (req.method() != http::verb::get) return make_response(req, json_reply(405, error_body("use GET")));
      std::string rel = t.path.size() <= 9 ? std::string("index.html") : t.path.substr(9);
      std::filesystem::path p = std::filesystem::path(rel).lexically_normal();
      if (p.empty() || p.is_absolute() || *p.begin() == "..")
        return make_response(req, json_reply(400, error_body("bad path")));
      auto full = *options.console_dir / p;
      if (std::filesystem::is_directory(full)) full /= "index.html";
      if (!std::filesystem::is_regular_file(full)) return make_response(req, json_reply(404, error_body("not found")));
      HttpReply r;
      r.content_type = std::string(mime_type(full));
      r.body = read_file(full);
      return make_response(req, r);
    }
    return make_response(req, json_reply(404, error_body("not found")));
  } catch (const std::exception& e) {
    spdlog::error("request {} failed: {}", t.path, e.what());
    return make_response(req, json_reply(500, error_body(e.what())));
  }
}

Server::Server(ServerOptions options, RegistrySet registries, BackendFactory backends, AgentFactories agent)
    : impl_(std::make_unique<Impl>()) {
  options.validate();
  if (registries.empty()) throw ConfigError("registries", "no speaker registry configured");
  if (!backends) throw ConfigError("backend", "no backend factory");
  impl_->options = std::move(options);
  impl_->registries = std::move(registries);
  impl_->backends = std::move(backends);
  impl_->agent = std::move(agent);
}

Server::~Server() { stop(); }

std::uint16_t Server::start() {
  auto& impl = *impl_;
  {
    std::lock_guard lock(impl.mu);
    if (impl.running) return impl.port;
  }
  boost::system::error_code ec;
  tcp::endpoint ep(net::ip::make_address(impl.options.bind_address), impl.options.port);
  impl.acceptor.emplace(impl.ioc);
  impl.acceptor->open(ep.protocol(), ec);
  if (!ec) impl.acceptor->set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) impl.acceptor->bind(ep, ec);
  if (!ec) impl.acceptor->listen(net::socket_base::max_listen_connections, ec);
  if (ec)
    throw TransportError(fmt::format("cannot listen on {}:{}: {}", impl.options.bind_address, impl.options.port,
                                     ec.message()));
  impl.port = impl.acceptor->local_endpoint().port();
  do_accept(impl_.get());
  for (int i = 0; i < impl.options.threads; ++i) impl.threads.emplace_back([&impl] { impl.ioc.run(); });
  {
    std::lock_guard lock(impl.mu);
    impl.running = true;
  }
  spdlog::info("listening on {}:{}", impl.options.bind_address, impl.port);
  return impl.port;
}

void Server::wait() {
  std::unique_lock lock(impl_->mu);
  impl_->cv.wait(lock, [&] { return impl_->stopped || !impl_->running; });
}

void Server::stop() {
  auto& impl = *impl_;
  std::vector<std::weak_ptr<Closable>> sessions;
  {
    std::lock_guard lock(impl.mu);
    if (!impl.running || impl.stopped) return;
    impl.stopped = true;
    sessions = impl.sessions;
  }
  net::post(impl.ioc, [&impl] {
    beast::error_code ec;
    impl.acceptor->close(ec);
  });
  for (auto& w : sessions)
    if (auto s = w.lock()) s->shutdown();
  // Let the shutdown handlers run before stopping the loop.
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  impl.ioc.stop();
  for (auto& t : impl.threads)
    if (t.joinable()) t.join();
  impl.threads.clear();
  impl.cv.notify_all();
}

std::uint16_t Server::port() const noexcept { return impl_->port; }

}  // namespace emojivoice::server
