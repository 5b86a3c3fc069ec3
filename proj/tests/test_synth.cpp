#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "emojivoice/emoji_text.hpp"
#include "emojivoice/error.hpp"
#include "emojivoice/synth.hpp"

using namespace emojivoice;

namespace {

ProsodyParams params(double base, double range, double rate = 4.0) {
  ProsodyParams p;
  p.base_f0_hz = base;
  p.f0_range_semitones = range;
  p.rate_sps = rate;
  return p;
}

AudioClip sine(double hz, double seconds, int sr = 22050) {
  AudioClip c;
  c.sample_rate = sr;
  auto n = static_cast<std::size_t>(seconds * sr);
  for (std::size_t i = 0; i < n; ++i)
    c.samples.push_back(static_cast<float>(0.5 * std::sin(2.0 * std::numbers::pi * hz * i / sr)));
  return c;
}

std::shared_ptr<const StyleRegistry> paige() { return std::make_shared<const StyleRegistry>(shipped_registry()); }

int id_of(const StyleRegistry& reg, const char* emoji) { return resolve(reg, parse_single_emoji(emoji)).style_id; }

}  // namespace

TEST(SyllableCount, VowelGroupsPerWord) {
  EXPECT_EQ(syllable_count("cat"), 1);
  EXPECT_EQ(syllable_count("banana split"), 4);
  EXPECT_EQ(syllable_count("rhythm"), 1);   // y counts as a vowel
  EXPECT_EQ(syllable_count("happy"), 2);
  EXPECT_EQ(syllable_count("psst hmm"), 2); // minimum one per word
  EXPECT_EQ(syllable_count("Hello, world!"), 3);
  EXPECT_EQ(syllable_count("don't"), 1);
}

TEST(ParametricDuration, ClosedForm) {
  EXPECT_NEAR(parametric_duration("cat", params(200, 0, 4)), 0.40, 1e-12);
  EXPECT_NEAR(parametric_duration("banana split", params(200, 0, 4)), 1.15, 1e-12);
  EXPECT_THROW(parametric_duration("", params(200, 0, 4)), PreconditionError);
}

TEST(F0Contour, ZeroRangeIsFlat) {
  auto c = parametric_f0_contour("a flat little phrase", params(200, 0));
  for (double t = 0.0; t <= c.duration(); t += 0.01) EXPECT_NEAR(c.at(t), 200.0, 1e-9);
}

TEST(F0Contour, StatementDeclines) {
  auto c = parametric_f0_contour("a statement here.", params(200, 4));
  EXPECT_NEAR(c.at(0.0), 200.0 * std::pow(2.0, 2.0 / 12.0), 1e-9);
  EXPECT_NEAR(c.at(c.duration()), 200.0 * std::pow(2.0, -2.0 / 12.0), 1e-9);
  EXPECT_NEAR(c.at(0.0), 224.49, 0.01);
  EXPECT_NEAR(c.at(c.duration()), 178.18, 0.01);
  for (double t = 0.0; t + 0.01 <= c.duration(); t += 0.01) EXPECT_GE(c.at(t), c.at(t + 0.01) - 1e-9);
}

TEST(F0Contour, QuestionRisesOverLastFifth) {
  auto c = parametric_f0_contour("is it a question?", params(200, 4));
  double start = 200.0 * std::pow(2.0, 2.0 / 12.0);
  EXPECT_NEAR(c.at(c.duration()), start, 1e-9);
  double low = 200.0 * std::pow(2.0, -2.0 / 12.0);
  EXPECT_NEAR(c.at(0.8 * c.duration()), low, 1e-9);
}

TEST(EstimateF0, PureSines) {
  for (double hz : {220.0, 110.0, 440.0}) {
    auto track = estimate_f0(sine(hz, 1.0));
    ASSERT_TRUE(track.median()) << hz;
    EXPECT_NEAR(*track.median(), hz, 1.0) << hz;
  }
}

TEST(EstimateF0, SilenceIsUnvoicedAndShortClipThrows) {
  AudioClip silent;
  silent.samples.assign(22050, 0.0f);
  EXPECT_FALSE(estimate_f0(silent).median());
  EXPECT_THROW(estimate_f0(sine(200, 0.01)), LengthError);
}

TEST(EstimateF0, ParametricFlatClip) {
  auto reg = paige();
  ParametricBackend backend(reg);
  auto clip = backend.render("the quick brown fox jumps over the lazy dog", params(200, 0), 1);
  auto median = estimate_f0(clip).median();
  ASSERT_TRUE(median);
  EXPECT_NEAR(*median, 200.0, 20.0);
}

TEST(ParametricBackend, DeterministicForFixedRequest) {
  auto reg = paige();
  ParametricBackend backend(reg);
  int smile = id_of(*reg, "\U0001F642");
  auto a = backend.synthesize({"Hello world.", smile, 7});
  auto b = backend.synthesize({"Hello world.", smile, 7});
  EXPECT_EQ(a.samples, b.samples);
  auto c = backend.synthesize({"Hello world.", smile, 8});
  EXPECT_NE(a.samples, c.samples);
  EXPECT_EQ(a.sample_rate, 22050);
  EXPECT_GT(a.synth_wall_time, 0.0);
}

TEST(ParametricBackend, SleepyIsSlowerThanCelebrating) {
  auto reg = paige();
  ParametricBackend backend(reg);
  int sleepy = id_of(*reg, "\U0001F634");
  int party = id_of(*reg, "\U0001F973");
  auto slow = backend.synthesize({"Hi.", sleepy, 0});
  auto fast = backend.synthesize({"Hi.", party, 0});
  EXPECT_GT(slow.duration(), fast.duration());
  EXPECT_NEAR(slow.duration(), parametric_duration("Hi.", reg->style(sleepy).prosody), 0.010);
  EXPECT_NEAR(fast.duration(), parametric_duration("Hi.", reg->style(party).prosody), 0.010);
}

TEST(ParametricBackend, RejectsBadRequests) {
  auto reg = paige();
  ParametricBackend backend(reg);
  EXPECT_THROW(backend.synthesize({"", 0, 0}), PreconditionError);
  EXPECT_THROW(backend.synthesize({"hi", 99, 0}), StyleError);
  EXPECT_THROW(backend.synthesize({"hi \U0001F642", 0, 0}), PreconditionError);
}

TEST(ParametricBackend, DurationLawAcrossShippedStyles) {
  for (const auto& name : shipped_speakers()) {
    auto reg = std::make_shared<const StyleRegistry>(shipped_registry(name));
    ParametricBackend backend(reg);
    for (const auto& s : reg->styles()) {
      const std::string text = "Every style keeps its own tempo, doesn't it?";
      auto clip = backend.synthesize({text, s.style_id, 3});
      EXPECT_NEAR(clip.duration(), parametric_duration(text, s.prosody), 0.010) << name << " " << s.name;
    }
  }
}

TEST(ParametricBackend, PitchLawAcrossShippedStyles) {
  for (const auto& name : shipped_speakers()) {
    auto reg = std::make_shared<const StyleRegistry>(shipped_registry(name));
    ParametricBackend backend(reg);
    for (const auto& s : reg->styles()) {
      const std::string text = "A steady sentence that gives the tracker enough voiced frames.";
      auto clip = backend.synthesize({text, s.style_id, 11});
      auto median = estimate_f0(clip).median();
      ASSERT_TRUE(median) << name << " " << s.name;
      double expected = parametric_f0_contour(text, s.prosody).median();
      EXPECT_NEAR(*median, expected, 0.10 * expected) << name << " " << s.name;
    }
  }
}

TEST(ParametricBackend, SpanGrowsWithRange) {
  auto reg = paige();
  ParametricBackend backend(reg);
  const std::string text = "We measure how far the pitch travels across this phrase.";
  double previous = -1.0;
  for (double range : {0.0, 2.0, 4.0, 8.0}) {
    auto clip = backend.render(text, params(200, range, 4.0), 5);
    auto span = estimate_f0(clip).span();
    ASSERT_TRUE(span);
    EXPECT_GE(*span, previous) << range;
    previous = *span;
  }
}

TEST(ComputeRtf, Definition) {
  EXPECT_DOUBLE_EQ(compute_rtf(10.0, 3.0), 0.3);
  EXPECT_DOUBLE_EQ(compute_rtf(1.0, 1.0), 1.0);
  EXPECT_THROW(compute_rtf(0.0, 1.0), DomainError);
  EXPECT_THROW(compute_rtf(-1.0, 1.0), DomainError);
}
