#pragma once

// Client for a synthesis engine running in another process.
//
// Wire protocol (one TCP connection, requests served in order):
//
//   request  : {"text":"<utf-8>","style_id":<int>,"request_id":<uint>}\n
//   response : {"request_id":<uint>,"sample_rate":<int>,"n_samples":<uint>,"synth_ms":<number>}\n
//              followed by n_samples little-endian signed 16-bit mono samples
//   error    : {"request_id":<uint>,"error":"<message>"}\n   (no payload)
//
// Lines are compact JSON with keys in exactly the order shown, terminated by
// a single LF.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emojivoice/synth.hpp"

namespace emojivoice {

struct BackendRequest {
  std::string text;
  int style_id = 0;
  std::uint64_t request_id = 0;
};

struct BackendResponseHeader {
  std::uint64_t request_id = 0;
  int sample_rate = kDefaultSampleRate;
  std::uint64_t n_samples = 0;
  double synth_ms = 0.0;
  std::optional<std::string> error;
};

std::string encode_request(const BackendRequest& request);
BackendRequest decode_request(std::string_view line);
std::string encode_response_header(const BackendResponseHeader& header);
BackendResponseHeader decode_response_header(std::string_view line);
std::string encode_pcm16(std::span<const std::int16_t> samples);

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

// "host:port"; throws PreconditionError when malformed.
Endpoint parse_endpoint(std::string_view text);

// Connects lazily and keeps the connection open between requests. A
// failure closes the connection; the next request reconnects.
class ExternalBackend final : public SynthBackend {
 public:
  explicit ExternalBackend(Endpoint endpoint, double timeout_seconds = 30.0);
  ~ExternalBackend() override;
  ExternalBackend(const ExternalBackend&) = delete;
  ExternalBackend& operator=(const ExternalBackend&) = delete;

  // synth_wall_time is the generation time the engine reports.
  AudioClip synthesize(const SynthRequest& request) override;
  std::string name() const override { return "external"; }

 private:
  void connect();
  void close() noexcept;
  void send_all(std::string_view bytes);
  std::string read_line();
  void read_exact(char* out, std::size_t n);

  Endpoint endpoint_;
  double timeout_;
  int fd_ = -1;
  std::uint64_t next_id_ = 1;
  std::string buffer_;
};

}  // namespace emojivoice
