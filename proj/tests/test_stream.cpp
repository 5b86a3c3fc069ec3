#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "emojivoice/error.hpp"
#include "emojivoice/stream.hpp"
#include "fakes.hpp"

using namespace emojivoice;

namespace {

struct RecordingSink final : PlaybackSink {
  explicit RecordingSink(bool sleep = false) : sleep_(sleep) {}
  void play(const PlaybackItem& item) override {
    order.push_back(item.phrase_index);
    texts.push_back(item.phrase.clean_text);
    styles.push_back(item.style_id);
    if (sleep_) std::this_thread::sleep_for(std::chrono::duration<double>(item.clip.duration()));
  }
  std::vector<std::size_t> order;
  std::vector<std::string> texts;
  std::vector<int> styles;
  bool sleep_;
};

}  // namespace

TEST(StreamScript, DeliversPhrasesInSourceOrder) {
  auto reg = std::make_shared<const StyleRegistry>(shipped_registry());
  Script script = segment_phrases("One. \U0001F602 Two! \U0001F622 Three? \U0001F621");
  ParametricBackend backend(reg);
  RecordingSink sink;
  StreamOptions opts;
  opts.pace = false;
  RtfReport report = stream_script(script, *reg, backend, sink, opts);
  EXPECT_EQ(sink.order, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(sink.texts, (std::vector<std::string>{"One.", "Two!", "Three?"}));
  EXPECT_EQ(sink.styles, (std::vector<int>{1, 2, 3}));
  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_TRUE(report.complete());
  for (const auto& r : report.rows) EXPECT_NEAR(r.rtf * r.audio_seconds, r.synth_seconds, 1e-12);
}

TEST(StreamScript, EmptyScriptIsRejected) {
  auto reg = shipped_registry();
  ParametricBackend backend(std::make_shared<const StyleRegistry>(reg));
  RecordingSink sink;
  EXPECT_THROW(stream_script(Script{}, reg, backend, sink), PreconditionError);
}

TEST(StreamScript, BackendFailureDrainsAndReportsPartially) {
  auto reg = shipped_registry();
  Script script = segment_phrases("First. \U0001F642 Second. \U0001F642 Third. \U0001F642");
  fakes::TimedBackend backend(0.1, 0.001, 1);
  RecordingSink sink;
  StreamOptions opts;
  opts.pace = false;
  RtfReport report = stream_script(script, reg, backend, sink, opts);
  EXPECT_EQ(sink.order, (std::vector<std::size_t>{0}));
  ASSERT_EQ(report.rows.size(), 1u);
  ASSERT_TRUE(report.error);
  EXPECT_FALSE(report.complete());
  EXPECT_NE(report.error->find("phrase 1"), std::string::npos);
}

TEST(StreamScript, LookaheadKeepsGapAtThePause) {
  // Synthesis (30 ms) is faster than playback (250 ms), so each phrase is
  // ready before the previous one ends and only the pause separates them.
  auto reg = shipped_registry();
  Script script = segment_phrases("A. \U0001F642 B. \U0001F642 C. \U0001F642 D. \U0001F642");
  fakes::TimedBackend backend(0.25, 0.03);
  RecordingSink sink(true);
  RtfReport report = stream_script(script, reg, backend, sink);
  ASSERT_EQ(report.rows.size(), 4u);
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    EXPECT_GE(report.rows[i].gap_before, kInterPhrasePauseSeconds - 0.002) << i;
    EXPECT_LE(report.rows[i].gap_before, kInterPhrasePauseSeconds + 0.05) << i;
  }
}

TEST(StreamScript, SeedsArePerPhrase) {
  auto reg = shipped_registry();
  Script script = segment_phrases("A. B. C.");
  fakes::TimedBackend backend(0.05, 0.0);
  RecordingSink sink;
  StreamOptions opts;
  opts.pace = false;
  opts.seed = 100;
  stream_script(script, reg, backend, sink, opts);
  ASSERT_EQ(backend.requests.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(backend.requests[i].seed, 100 + i);
}

TEST(PlanPlayback, FastSynthesisAddsNoGapBeyondPause) {
  std::vector<double> synth = {0.3, 0.2, 0.25, 0.1};
  std::vector<double> audio = {2.0, 1.5, 3.0, 1.0};
  auto plan = plan_playback(synth, audio, 0.2);
  for (std::size_t i = 1; i < plan.size(); ++i) EXPECT_NEAR(plan[i].gap_before, 0.2, 1e-12);
}

TEST(PlanPlayback, GapBoundedBySynthesisOverrun) {
  std::vector<double> synth = {0.5, 3.0, 0.1, 4.0};
  std::vector<double> audio = {1.0, 1.0, 2.0, 1.0};
  auto plan = plan_playback(synth, audio, 0.2);
  for (std::size_t i = 1; i < plan.size(); ++i) {
    double bound = std::max(0.0, synth[i] - audio[i - 1]) + 0.2;
    EXPECT_LE(plan[i].gap_before, bound + 1e-12) << i;
    EXPECT_GE(plan[i].gap_before, 0.2 - 1e-12) << i;
  }
  EXPECT_THROW(plan_playback(synth, std::vector<double>{1.0}, 0.2), PreconditionError);
}
