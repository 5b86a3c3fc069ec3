#include <gtest/gtest.h>

#include <boost/asio.hpp>
#include <functional>
#include <thread>

#include "emojivoice/audio.hpp"
#include "emojivoice/error.hpp"
#include "emojivoice/external_backend.hpp"

using namespace emojivoice;
namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

// Accepts connections one at a time and answers each request line with
// whatever the handler returns (header line plus payload bytes). An empty
// reply closes the connection.
class FakeEngine {
 public:
  using Handler = std::function<std::string(const BackendRequest&)>;

  explicit FakeEngine(Handler handler)
      : acceptor_(io_, tcp::endpoint(asio::ip::make_address("127.0.0.1"), 0)),
        handler_(std::move(handler)) {
    thread_ = std::thread([this] { serve(); });
  }
  ~FakeEngine() {
    stopping_ = true;
    // A blocking accept does not notice close(); wake it with a connection.
    asio::io_context io;
    tcp::socket poke(io);
    boost::system::error_code ec;
    poke.connect(acceptor_.local_endpoint(), ec);
    thread_.join();
  }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }
  int connections() const { return connections_; }
  std::vector<std::string> lines;

 private:
  void serve() {
    while (!stopping_) {
      tcp::socket sock(io_);
      boost::system::error_code ec;
      acceptor_.accept(sock, ec);
      if (ec || stopping_) return;
      ++connections_;
      asio::streambuf buf;
      while (true) {
        std::size_t n = asio::read_until(sock, buf, '\n', ec);
        if (ec) break;
        std::string line(asio::buffers_begin(buf.data()), asio::buffers_begin(buf.data()) + n - 1);
        buf.consume(n);
        lines.push_back(line);
        std::string reply = handler_(decode_request(line));
        if (reply.empty()) break;
        asio::write(sock, asio::buffer(reply), ec);
        if (ec) break;
      }
    }
  }

  asio::io_context io_;
  tcp::acceptor acceptor_;
  Handler handler_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  std::atomic<int> connections_{0};
};

std::string audio_reply(std::uint64_t id, std::vector<std::int16_t> samples, double synth_ms,
                        int rate = 16000) {
  BackendResponseHeader h;
  h.request_id = id;
  h.sample_rate = rate;
  h.n_samples = samples.size();
  h.synth_ms = synth_ms;
  return encode_response_header(h) + encode_pcm16(samples);
}

std::string error_reply(std::uint64_t id, std::string message) {
  BackendResponseHeader h;
  h.request_id = id;
  h.error = std::move(message);
  return encode_response_header(h);
}

}  // namespace

TEST(WireFormat, RequestLineIsCompactAndOrdered) {
  std::string line = encode_request({"Hi \"there\"", 3, 7});
  EXPECT_EQ(line, "{\"text\":\"Hi \\\"there\\\"\",\"style_id\":3,\"request_id\":7}\n");
  BackendRequest back = decode_request(line);
  EXPECT_EQ(back.text, "Hi \"there\"");
  EXPECT_EQ(back.style_id, 3);
  EXPECT_EQ(back.request_id, 7u);
}

TEST(WireFormat, HeaderRoundTrips) {
  BackendResponseHeader h;
  h.request_id = 42;
  h.sample_rate = 24000;
  h.n_samples = 1234;
  h.synth_ms = 12.5;
  std::string line = encode_response_header(h);
  EXPECT_EQ(line, "{\"request_id\":42,\"sample_rate\":24000,\"n_samples\":1234,\"synth_ms\":12.5}\n");
  auto back = decode_response_header(line);
  EXPECT_EQ(back.request_id, 42u);
  EXPECT_EQ(back.sample_rate, 24000);
  EXPECT_EQ(back.n_samples, 1234u);
  EXPECT_DOUBLE_EQ(back.synth_ms, 12.5);
  EXPECT_FALSE(back.error);

  auto err = decode_response_header(error_reply(9, "boom"));
  EXPECT_EQ(err.request_id, 9u);
  ASSERT_TRUE(err.error);
  EXPECT_EQ(*err.error, "boom");
  EXPECT_THROW(decode_response_header("not json"), TransportError);
}

TEST(WireFormat, Pcm16IsLittleEndian) {
  std::vector<std::int16_t> s = {1, -2, 0x1234};
  std::string bytes = encode_pcm16(s);
  ASSERT_EQ(bytes.size(), 6u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 0x01);
  EXPECT_EQ(static_cast<unsigned char>(bytes[1]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[2]), 0xFE);
  EXPECT_EQ(static_cast<unsigned char>(bytes[3]), 0xFF);
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 0x34);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0x12);
}

TEST(Endpoint, Parses) {
  auto e = parse_endpoint("localhost:9000");
  EXPECT_EQ(e.host, "localhost");
  EXPECT_EQ(e.port, 9000);
  EXPECT_THROW(parse_endpoint("localhost"), PreconditionError);
  EXPECT_THROW(parse_endpoint("localhost:abc"), PreconditionError);
  EXPECT_THROW(parse_endpoint("localhost:70000"), PreconditionError);
}

TEST(ExternalBackend, ReturnsSamplesAndReportedSynthTime) {
  FakeEngine engine([](const BackendRequest& r) {
    return audio_reply(r.request_id, {0, 16384, -16384, 32767}, 250.0);
  });
  ExternalBackend backend({"127.0.0.1", engine.port()});
  AudioClip clip = backend.synthesize({"Hello there.", 4, 0});
  EXPECT_EQ(clip.sample_rate, 16000);
  ASSERT_EQ(clip.samples.size(), 4u);
  EXPECT_NEAR(clip.samples[1], 0.5, 1e-4);
  EXPECT_NEAR(clip.samples[2], -0.5, 1e-4);
  EXPECT_DOUBLE_EQ(clip.synth_wall_time, 0.25);

  // Connection is reused between requests.
  backend.synthesize({"Again.", 4, 0});
  EXPECT_EQ(engine.connections(), 1);
  ASSERT_EQ(engine.lines.size(), 2u);
  EXPECT_EQ(decode_request(engine.lines[0]).style_id, 4);
  EXPECT_NE(decode_request(engine.lines[0]).request_id, decode_request(engine.lines[1]).request_id);
}

TEST(ExternalBackend, StyleErrorsSurfaceAsStyleError) {
  FakeEngine engine([](const BackendRequest& r) {
    return error_reply(r.request_id, "unknown style_id " + std::to_string(r.style_id));
  });
  ExternalBackend backend({"127.0.0.1", engine.port()});
  EXPECT_THROW(backend.synthesize({"Hi.", 99, 0}), StyleError);
}

TEST(ExternalBackend, EngineErrorsAreTransportErrors) {
  FakeEngine engine([](const BackendRequest& r) { return error_reply(r.request_id, "out of memory"); });
  ExternalBackend backend({"127.0.0.1", engine.port()});
  EXPECT_THROW(backend.synthesize({"Hi.", 0, 0}), TransportError);
}

TEST(ExternalBackend, DroppedConnectionThenReconnects) {
  std::atomic<int> calls{0};
  FakeEngine engine([&](const BackendRequest& r) -> std::string {
    if (calls++ == 0) return "";
    return audio_reply(r.request_id, {100, 200}, 1.0);
  });
  ExternalBackend backend({"127.0.0.1", engine.port()});
  EXPECT_THROW(backend.synthesize({"Hi.", 0, 0}), TransportError);
  AudioClip clip = backend.synthesize({"Hi.", 0, 0});
  EXPECT_EQ(clip.samples.size(), 2u);
  EXPECT_EQ(engine.connections(), 2);
}

TEST(ExternalBackend, WrongRequestIdIsRejected) {
  FakeEngine engine([](const BackendRequest& r) { return audio_reply(r.request_id + 1, {1}, 1.0); });
  ExternalBackend backend({"127.0.0.1", engine.port()});
  EXPECT_THROW(backend.synthesize({"Hi.", 0, 0}), TransportError);
}

TEST(ExternalBackend, UnreachableEngine) {
  std::uint16_t port;
  {
    asio::io_context io;
    tcp::acceptor a(io, tcp::endpoint(asio::ip::make_address("127.0.0.1"), 0));
    port = a.local_endpoint().port();
  }
  ExternalBackend backend({"127.0.0.1", port}, 2.0);
  EXPECT_THROW(backend.synthesize({"Hi.", 0, 0}), TransportError);
  EXPECT_THROW(backend.synthesize({"", 0, 0}), PreconditionError);
}
