#include <gtest/gtest.h>

#include "ecs/tokenizer.hpp"
#include "ecs/util.hpp"

namespace {

using ecs::FillerKind;
using ecs::TokenId;

const ecs::Vocabulary& vocab() {
  static const ecs::Vocabulary v = ecs::default_vocabulary();
  return v;
}

TEST(Vocabulary, DefaultHasDeclaredShape) {
  const auto& v = vocab();
  EXPECT_EQ(v.size(), 512u);
  for (FillerKind k : ecs::kAllFillerKinds) EXPECT_TRUE(v.filler_id(k).has_value()) << ecs::to_string(k);
  for (char c : ecs::kOptionLetters) EXPECT_TRUE(v.option_id(c).has_value());
  EXPECT_EQ(v.entry(*v.filler_id(FillerKind::Space)).text, " ");
  EXPECT_EQ(v.entry(*v.filler_id(FillerKind::Enter)).text, "\n");
  EXPECT_EQ(v.entry(*v.filler_id(FillerKind::Tab)).text, "\t");
  EXPECT_EQ(v.entry(*v.filler_id(FillerKind::Period)).text, ".");
  EXPECT_EQ(v.entry(*v.filler_id(FillerKind::Pad)).text, "<pad>");
  EXPECT_EQ(v.entry(*v.filler_id(FillerKind::Dash)).text, "-");
}

TEST(Encode, EdgeCases) {
  const auto& v = vocab();
  EXPECT_TRUE(v.encode("").empty());
  EXPECT_EQ(v.encode("Answer:"), std::vector<TokenId>{v.answer_cue_id()});
  // Longest match prefers the cue over the option letter A.
  EXPECT_EQ(v.encode("Answer: A"), (std::vector<TokenId>{v.answer_cue_id(), *v.filler_id(FillerKind::Space),
                                                         *v.option_id('A')}));
}

TEST(Encode, UnmatchedCodepointBecomesOneUnknown) {
  const auto& v = vocab();
  const auto ids = v.encode("a\xc3\xa9" "b");  // a, e-acute, b
  ASSERT_EQ(ids.size(), 3u);
  EXPECT_EQ(ids[1], v.unknown_id());
}

TEST(Encode, RoundTripOverRandomInVocabularyStrings) {
  const auto& v = vocab();
  ecs::Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    std::string text;
    const std::size_t pieces = 1 + rng.below(20);
    for (std::size_t i = 0; i < pieces; ++i) text += v.entry(static_cast<TokenId>(rng.below(v.size()))).text;
    EXPECT_EQ(v.decode(v.encode(text)), text);
  }
}

TEST(FillerIds, CountsAndAliasing) {
  const auto& v = vocab();
  EXPECT_TRUE(ecs::filler_ids(v, FillerKind::Period, 0).empty());
  EXPECT_EQ(ecs::filler_ids(v, FillerKind::Pad, 3), std::vector<TokenId>(3, v.pad_id()));

  const auto eos_aliased = v.with_filler_alias(FillerKind::Pad, v.eos_id());
  EXPECT_EQ(ecs::filler_ids(eos_aliased, FillerKind::Pad, 2), std::vector<TokenId>(2, v.eos_id()));

  for (FillerKind k : ecs::kAllFillerKinds)
    for (std::size_t m : {0u, 1u, 17u, 8192u}) EXPECT_EQ(ecs::filler_ids(v, k, m).size(), m);
}

TEST(FillerIds, MissingKindRaises) {
  std::vector<ecs::VocabEntry> entries;
  auto add = [&](std::string text, ecs::TokenClass cls) {
    ecs::VocabEntry e;
    e.id = static_cast<TokenId>(entries.size());
    e.text = std::move(text);
    e.cls = cls;
    entries.push_back(e);
  };
  add("<eos>", ecs::TokenClass::Special);
  add("<eot>", ecs::TokenClass::Special);
  add("<unk>", ecs::TokenClass::Special);
  add("Answer:", ecs::TokenClass::AnswerCue);
  const ecs::Vocabulary v(entries);
  EXPECT_EQ(v.pad_id(), v.eos_id());
  try {
    ecs::filler_ids(v, FillerKind::Dash, 1);
    FAIL();
  } catch (const ecs::Error& e) {
    EXPECT_EQ(e.code(), ecs::ErrorCode::MissingFiller);
  }
}

TEST(VocabularyFile, FormatParsesBackIdentically) {
  const std::string text = ecs::format_vocabulary(vocab());
  EXPECT_NE(text.find("8\t\\n\tfiller:enter\n"), std::string::npos);
  EXPECT_NE(text.find("9\t\\t\tfiller:tab\n"), std::string::npos);
  EXPECT_NE(text.find("\tanswer_cue\n"), std::string::npos);
  EXPECT_NE(text.find("\toption:E\n"), std::string::npos);
  const auto back = ecs::parse_vocabulary(text);
  EXPECT_EQ(ecs::format_vocabulary(back), text);
}

TEST(VocabularyFile, RejectsMalformedLines) {
  EXPECT_THROW(ecs::parse_vocabulary("0\t<eos>\n"), ecs::Error);
  EXPECT_THROW(ecs::parse_vocabulary("0\tx\\q\tnormal\n"), ecs::Error);
  EXPECT_THROW(ecs::parse_vocabulary("0\tx\tfiller:comma\n"), ecs::Error);
  // Duplicate string breaks bijectivity.
  EXPECT_THROW(ecs::parse_vocabulary("0\t<eos>\tspecial\n1\t<eot>\tspecial\n2\t<unk>\tspecial\n3\tAnswer:\tanswer_cue\n"
                                     "4\tx\tnormal\n5\tx\tnormal\n"),
               ecs::Error);
}

TEST(Escapes, RoundTrip) {
  for (std::string s : {"\\", "\n\t", "a\\nb", "plain"}) EXPECT_EQ(ecs::unescape_token(ecs::escape_token(s)), s);
  EXPECT_FALSE(ecs::unescape_token("trailing\\").has_value());
}

}  // namespace
