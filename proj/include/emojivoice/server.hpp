#pragma once

// HTTP + WebSocket service: registry listing, one-shot synthesis, operator
// queue sessions and push-to-talk agent sessions. See README for schemas.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "emojivoice/agent.hpp"
#include "emojivoice/operator_queue.hpp"
#include "emojivoice/synth.hpp"
#include "emojivoice/voice_registry.hpp"

namespace emojivoice::server {

inline constexpr std::uint16_t kDefaultPort = 8731;
inline constexpr int kProtocolVersion = 1;

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  bool allow_external = false;  // required for a non-loopback bind_address
  std::uint16_t port = kDefaultPort;  // 0 picks a free port
  int threads = 4;
  std::optional<std::filesystem::path> console_dir;  // served under /console/
  // Operator items stay "speaking" for the clip duration (interruptible).
  bool realtime_playback = true;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

using BackendFactory = std::function<std::unique_ptr<SynthBackend>(std::shared_ptr<const StyleRegistry>)>;

// Without both factories WS /v1/agent answers 503.
struct AgentFactories {
  AgentConfig config;
  std::function<std::unique_ptr<AsrClient>()> asr;
  std::function<std::unique_ptr<ChatClient>()> chat;
};

// Shipped registries (optional) plus YAML files. A file with no styles is
// skipped with a warning; any other problem throws.
RegistrySet build_registry_set(std::span<const std::filesystem::path> files, bool include_shipped);

nlohmann::ordered_json voices_json(const RegistrySet& registries);
nlohmann::ordered_json item_json(const OperatorQueueItem& item);
nlohmann::ordered_json turn_record_json(const TurnRecord& record);

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

// POST /v1/synthesize body {"text", "speaker"?, "seed"?}.
HttpReply handle_synthesize(std::string_view body, const RegistrySet& registries, const BackendFactory& backends,
                            std::uint64_t default_seed);

class Server {
 public:
  Server(ServerOptions options, RegistrySet registries, BackendFactory backends, AgentFactories agent = {});
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds, listens and starts the worker threads. Returns the bound port.
  // Throws TransportError when the address cannot be bound.
  std::uint16_t start();
  // Blocks until stop() is called (from another thread or a signal).
  void wait();
  void stop();
  std::uint16_t port() const noexcept;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace emojivoice::server
