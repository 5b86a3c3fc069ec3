#include "emojivoice/external_backend.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include <json.hpp>

#include "emojivoice/error.hpp"

namespace emojivoice {

using ordered_json = nlohmann::ordered_json;

std::string encode_request(const BackendRequest& r) {
  ordered_json j;
  j["text"] = r.text;
  j["style_id"] = r.style_id;
  j["request_id"] = r.request_id;
  return j.dump() + "\n";
}

BackendRequest decode_request(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    return BackendRequest{j.at("text").get<std::string>(), j.at("style_id").get<int>(),
                          j.at("request_id").get<std::uint64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed backend request: ") + e.what());
  }
}

std::string encode_response_header(const BackendResponseHeader& h) {
  ordered_json j;
  j["request_id"] = h.request_id;
  if (h.error) {
    j["error"] = *h.error;
  } else {
    j["sample_rate"] = h.sample_rate;
    j["n_samples"] = h.n_samples;
    j["synth_ms"] = h.synth_ms;
  }
  return j.dump() + "\n";
}

BackendResponseHeader decode_response_header(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    BackendResponseHeader h;
    h.request_id = j.at("request_id").get<std::uint64_t>();
    if (j.contains("error")) {
      h.error = j.at("error").get<std::string>();
      return h;
    }
    h.sample_rate = j.at("sample_rate").get<int>();
    h.n_samples = j.at("n_samples").get<std::uint64_t>();
    h.synth_ms = j.at("synth_ms").get<double>();
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed backend response: ") + e.what());
  }
}

std::string encode_pcm16(std::span<const std::int16_t> samples) {
  std::string out;
  out.reserve(samples.size() * 2);
  for (std::int16_t s : samples) {
    const auto u = static_cast<std::uint16_t>(s);
    out.push_back(static_cast<char>(u & 0xFF));
    out.push_back(static_cast<char>(u >> 8));
  }
  return out;
}

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw PreconditionError("endpoint must look like host:port, got \"" + std::string(text) + "\"");
  }
  unsigned port = 0;
  const auto port_text = text.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port == 0 || port > 65535) {
    throw PreconditionError("invalid port in endpoint \"" + std::string(text) + "\"");
  }
  return Endpoint{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

ExternalBackend::ExternalBackend(Endpoint endpoint, double timeout_seconds)
    : endpoint_(std::move(endpoint)), timeout_(timeout_seconds) {}

ExternalBackend::~ExternalBackend() { close(); }

void ExternalBackend::close() noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  buffer_.clear();
}

void ExternalBackend::connect() {
  if (fd_ >= 0) return;
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto port = std::to_string(endpoint_.port);
  if (int rc = ::getaddrinfo(endpoint_.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw TransportError("cannot resolve " + endpoint_.host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    throw TransportError("backend unavailable at " + endpoint_.host + ":" + port);
  }
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout_);
  tv.tv_usec = static_cast<suseconds_t>((timeout_ - static_cast<double>(tv.tv_sec)) * 1e6);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  fd_ = fd;
}

void ExternalBackend::send_all(std::string_view bytes) {
  while (!bytes.empty()) {
    const auto n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("send failed: ") + std::strerror(errno));
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

void ExternalBackend::read_exact(char* out, std::size_t n) {
  const std::size_t from_buffer = std::min(n, buffer_.size());
  std::memcpy(out, buffer_.data(), from_buffer);
  buffer_.erase(0, from_buffer);
  std::size_t got = from_buffer;
  while (got < n) {
    const auto r = ::recv(fd_, out + got, n - got, 0);
    if (r == 0) throw TransportError("backend closed the connection");
    if (r < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("receive failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(r);
  }
}

std::string ExternalBackend::read_line() {
  constexpr std::size_t kMaxLine = 1 << 16;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (buffer_.size() > kMaxLine) throw TransportError("backend header line too long");
    char chunk[4096];
    const auto r = ::recv(fd_, chunk, sizeof chunk, 0);
    if (r == 0) throw TransportError("backend closed the connection");
    if (r < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("receive failed: ") + std::strerror(errno));
    }
    buffer_.append(chunk, static_cast<std::size_t>(r));
  }
}

AudioClip ExternalBackend::synthesize(const SynthRequest& request) {
  if (request.clean_text.empty()) throw PreconditionError("synthesis text must not be empty");
  const std::uint64_t id = next_id_++;
  try {
    connect();
    send_all(encode_request({request.clean_text, request.style_id, id}));
    const auto header = decode_response_header(read_line());
    if (header.request_id != id) throw TransportError("backend answered the wrong request");
    if (header.error) {
      if (header.error->find("style") != std::string::npos) throw StyleError(*header.error);
      throw TransportError("backend error: " + *header.error);
    }
    if (header.sample_rate <= 0 || header.n_samples == 0) {
      throw TransportError("backend returned empty audio");
    }
    std::string pcm(header.n_samples * 2, '\0');
    read_exact(pcm.data(), pcm.size());
    AudioClip clip;
    clip.sample_rate = header.sample_rate;
    clip.synth_wall_time = header.synth_ms / 1000.0;
    clip.samples.resize(header.n_samples);
    for (std::size_t i = 0; i < header.n_samples; ++i) {
      const auto lo = static_cast<unsigned char>(pcm[2 * i]);
      const auto hi = static_cast<unsigned char>(pcm[2 * i + 1]);
      const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
      clip.samples[i] = static_cast<float>(v) / 32767.0f;
    }
    return clip;
  } catch (const StyleError&) {
    throw;
  } catch (const TransportError&) {
    close();
    throw;
  }
}

}  // namespace emojivoice
