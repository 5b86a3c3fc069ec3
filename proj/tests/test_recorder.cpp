#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "emojivoice/audio.hpp"
#include "emojivoice/error.hpp"
#include "emojivoice/recorder.hpp"
#include "oracles.hpp"

using namespace emojivoice;

namespace {

std::string prompt_file(const std::vector<SessionEmoji>& set, std::size_t per_emoji) {
  std::string out = "# generated\n";
  for (const auto& e : set) {
    out += "[" + e.emoji + "]\n";
    for (std::size_t i = 0; i < per_emoji; ++i) out += "Sentence " + std::to_string(i) + " for style " + std::to_string(e.style_id) + ".\n";
    out += "\n";
  }
  return out;
}

PromptSession full_session(std::size_t recorded_per_emoji = kPromptsPerEmoji) {
  auto set = emoji_set_from(shipped_registry());
  PromptSession s = build_session(prompt_file(set, kPromptsPerEmoji), "Paige", set);
  for (std::size_t ei = 0; ei < set.size(); ++ei) {
    for (std::size_t pi = 0; pi < recorded_per_emoji; ++pi) {
      s.recordings[{ei, pi}] = Recording{recording_relative_path(ei, pi), 4.0};
    }
  }
  return s;
}

}  // namespace

TEST(PromptFile, ParsesSections) {
  auto parsed = parse_prompt_file("# c\n[\U0001F642]\nHello there.\n\n  Good day.  \n[\U0001F622]\nOh no.\n");
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed["\U0001F642"], (std::vector<std::string>{"Hello there.", "Good day."}));
  EXPECT_EQ(parsed["\U0001F622"], (std::vector<std::string>{"Oh no."}));
  EXPECT_THROW(parse_prompt_file("Orphan line.\n[\U0001F642]\nHi.\n"), SchemaError);
  EXPECT_THROW(parse_prompt_file("[not an emoji]\nHi.\n"), SchemaError);
}

TEST(PromptFile, ShippedSamplesCoverTheRegistry) {
  std::ifstream in(oracle::source_path("data/prompts/sample_prompts.txt"));
  std::string text((std::istreambuf_iterator<char>(in)), {});
  auto set = emoji_set_from(shipped_registry());
  PromptSession s = build_session(text, "Paige", set);
  EXPECT_EQ(s.emoji_set.size(), 11u);
  for (const auto& e : set) EXPECT_FALSE(s.prompts.at(e.emoji).empty()) << e.emoji;
}

TEST(Session, BuildCapsAndDisplays) {
  auto set = emoji_set_from(shipped_registry());
  ASSERT_EQ(set.size(), 11u);
  EXPECT_EQ(set[0].emoji, "\U0001F642");
  PromptSession s = build_session(prompt_file(set, 60), "Paige", set);
  EXPECT_EQ(s.total_prompts(), 11u * kPromptsPerEmoji);
  EXPECT_EQ(s.display_text(1, 3), "Sentence 3 for style 1. \U0001F602");
  EXPECT_EQ(s.emoji_index("\U0001F602"), 1u);
  EXPECT_THROW(s.emoji_index("\U0001F680"), SchemaError);

  std::vector<SessionEmoji> missing = {{"\U0001F680", 0}};
  EXPECT_THROW(build_session(prompt_file(set, 5), "Paige", missing), SchemaError);
}

TEST(Session, SaveLoadRoundTripAndImport) {
  oracle::TempDir dir;
  auto set = emoji_set_from(shipped_registry());
  PromptSession s = build_session(prompt_file(set, 3), "Paige", set);
  AudioClip clip;
  clip.sample_rate = 8000;
  clip.samples.assign(12000, 0.1f);
  write_wav(dir.path() / "take.wav", clip);
  import_recording(s, dir.path(), 2, 1, dir.path() / "take.wav");
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "wavs/2_1.wav"));
  EXPECT_NEAR(s.recordings.at({2, 1}).duration_seconds, 1.5, 1e-9);
  EXPECT_THROW(import_recording(s, dir.path(), 99, 0, dir.path() / "take.wav"), SchemaError);

  save_session(s, dir.path());
  PromptSession back = load_session(dir.path());
  EXPECT_EQ(back.speaker_name, "Paige");
  EXPECT_EQ(back.prompts, s.prompts);
  ASSERT_EQ(back.emoji_set.size(), s.emoji_set.size());
  for (std::size_t i = 0; i < s.emoji_set.size(); ++i) {
    EXPECT_EQ(back.emoji_set[i].emoji, s.emoji_set[i].emoji);
    EXPECT_EQ(back.emoji_set[i].style_id, s.emoji_set[i].style_id);
  }
  ASSERT_EQ(back.recordings.size(), 1u);
  EXPECT_EQ(back.recordings.at({2, 1}).relative_path, "wavs/2_1.wav");
  EXPECT_THROW(load_session(dir.path() / "nowhere"), IoError);
}

TEST(Split, FortyTenPerEmojiDisjointAndDeterministic) {
  PromptSession s = full_session();
  auto [train, val] = split_manifest(s);
  EXPECT_EQ(train.split, Split::Train);
  EXPECT_EQ(val.split, Split::Val);
  ASSERT_EQ(train.rows.size(), 11u * 40);
  ASSERT_EQ(val.rows.size(), 11u * 10);

  std::map<int, int> train_per, val_per;
  std::set<std::string> paths;
  for (const auto& r : train.rows) {
    ++train_per[r.style_id];
    paths.insert(r.relative_wav_path);
  }
  for (const auto& r : val.rows) {
    ++val_per[r.style_id];
    paths.insert(r.relative_wav_path);
  }
  EXPECT_EQ(paths.size(), 11u * 50);
  for (int id = 0; id < 11; ++id) {
    EXPECT_EQ(train_per[id], 40) << id;
    EXPECT_EQ(val_per[id], 10) << id;
  }
  for (const auto& r : train.rows) {
    // Text belongs to the same style as the row.
    EXPECT_NE(r.text.find("for style " + std::to_string(r.style_id) + "."), std::string::npos);
  }

  auto again = split_manifest(s);
  EXPECT_EQ(again.first, train);
  EXPECT_EQ(again.second, val);
  auto other = split_manifest(s, 40, 10, 7);
  EXPECT_NE(other.first, train);
}

TEST(Split, ShortEmojiRaisesCountError) {
  PromptSession s = full_session();
  s.recordings.erase({3, 0});
  try {
    split_manifest(s);
    FAIL();
  } catch (const CountError& e) {
    EXPECT_EQ(e.emoji(), "\U0001F621");
  }
}

TEST(Manifest, RoundTripsAndRejectsPipes) {
  Manifest m{Split::Train, {{"wavs/0_1.wav", 0, "Hello there."}, {"wavs/1_4.wav", 1, "Ha, that's funny!"}}};
  std::string text = write_manifest(m);
  EXPECT_EQ(text, "wavs/0_1.wav|0|Hello there.\nwavs/1_4.wav|1|Ha, that's funny!\n");
  EXPECT_EQ(parse_manifest(text, Split::Train), m);

  Manifest piped{Split::Val, {{"wavs/0_1.wav", 0, "a|b"}}};
  EXPECT_THROW(write_manifest(piped), SchemaError);
  Manifest broken{Split::Val, {{"wavs/0_1.wav", 0, "a\nb"}}};
  EXPECT_THROW(write_manifest(broken), SchemaError);
  Manifest dup{Split::Val, {{"x.wav", 0, "a"}, {"x.wav", 1, "b"}}};
  EXPECT_THROW(write_manifest(dup), SchemaError);
  EXPECT_THROW(parse_manifest("x.wav|notanumber|text\n", Split::Train), SchemaError);
  EXPECT_THROW(parse_manifest("x.wav|0\n", Split::Train), SchemaError);
}

TEST(Audit, FlagsEmojisUnderTheMinimum) {
  oracle::TempDir dir;
  std::vector<SessionEmoji> set = {{"\U0001F642", 0}, {"\U0001F602", 1}};
  PromptSession s = build_session(prompt_file(set, 50), "Paige", set);
  // 1 kHz keeps the files small; 50 x 4 s = 200 s and 50 x 3 s = 150 s.
  for (std::size_t ei = 0; ei < 2; ++ei) {
    AudioClip clip;
    clip.sample_rate = 1000;
    clip.samples.assign(ei == 0 ? 4000 : 3000, 0.0f);
    for (std::size_t pi = 0; pi < 50; ++pi) {
      auto rel = recording_relative_path(ei, pi);
      std::filesystem::create_directories(dir.path() / "wavs");
      write_wav(dir.path() / rel, clip);
      s.recordings[{ei, pi}] = Recording{rel, 0.0};
    }
  }
  AuditReport r = duration_audit(s, dir.path());
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_NEAR(r.entries[0].total_seconds, 200.0, 1e-9);
  EXPECT_FALSE(r.entries[0].shortfall_seconds);
  EXPECT_NEAR(r.entries[1].total_seconds, 150.0, 1e-9);
  ASSERT_TRUE(r.entries[1].shortfall_seconds);
  EXPECT_NEAR(*r.entries[1].shortfall_seconds, 30.0, 1e-9);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("\U0001F602"), std::string::npos);

  std::filesystem::remove(dir.path() / "wavs/0_7.wav");
  try {
    duration_audit(s, dir.path());
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(e.path().find("0_7.wav"), std::string::npos);
  }
}

TEST(PromptTemplate, HasEmojiPlaceholder) {
  EXPECT_NE(kPromptGenerationTemplate.find('X'), std::string_view::npos);
  EXPECT_NE(kPromptGenerationTemplate.find("50"), std::string_view::npos);
}
