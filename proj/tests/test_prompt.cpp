#include <gtest/gtest.h>

#include "ecs/datasets.hpp"
#include "ecs/prompt.hpp"

namespace {

using ecs::FillerKind;
using ecs::FillerPosition;
using ecs::FillerSpec;

const ecs::Vocabulary& vocab() {
  static const ecs::Vocabulary v = ecs::default_vocabulary();
  return v;
}

ecs::TaskSample mc_sample() {
  ecs::TaskSample s;
  s.id = "q1";
  s.kind = ecs::TaskKind::MultipleChoice;
  s.context = "The sum of 2 and 3";
  s.question = "Which option equals 2+3?";
  s.options = {{'A', "4"}, {'B', "5"}, {'C', "6"}, {'D', "7"}};
  s.gold = "B";
  return s;
}

TEST(Assemble, ZeroFillersMatchBaseline) {
  const ecs::PromptTemplate t;
  const auto base = ecs::assemble_baseline(mc_sample(), t, vocab());
  const auto p = ecs::assemble(mc_sample(), FillerSpec{FillerKind::Space, 0, FillerPosition::BeforeAnswerCue}, t, vocab());
  EXPECT_EQ(p.tokens, base.tokens);
  EXPECT_TRUE(p.ecs.empty());
  EXPECT_EQ(p.base_length, p.tokens.size());
  EXPECT_EQ(p.answer_cue_index, p.tokens.size() - 1);
}

TEST(Assemble, BeforeAnswerCuePutsCueLast) {
  const ecs::PromptTemplate t;
  const auto base = ecs::assemble_baseline(mc_sample(), t, vocab());
  const auto p = ecs::assemble(mc_sample(), FillerSpec{FillerKind::Period, 16, FillerPosition::BeforeAnswerCue}, t, vocab());
  const std::size_t T = base.base_length;
  ASSERT_EQ(p.tokens.size(), T + 16);
  EXPECT_EQ(p.answer_cue_index, T + 16 - 1);
  EXPECT_EQ(p.tokens.back(), vocab().answer_cue_id());
  EXPECT_EQ(p.ecs, (ecs::Span{T - 1, T + 15}));
  for (std::size_t i = p.ecs.begin; i < p.ecs.end; ++i) EXPECT_EQ(p.tokens[i], *vocab().filler_id(FillerKind::Period));
  // Prefix preservation.
  for (std::size_t i = 0; i < p.ecs.begin; ++i) EXPECT_EQ(p.tokens[i], base.tokens[i]);
}

TEST(Assemble, AfterAnswerCueAppendsFillers) {
  const ecs::PromptTemplate t;
  const auto p = ecs::assemble(mc_sample(), FillerSpec{FillerKind::Dash, 4, FillerPosition::AfterAnswerCue}, t, vocab());
  const std::size_t T = p.base_length;
  ASSERT_EQ(p.tokens.size(), T + 4);
  EXPECT_EQ(p.answer_cue_index, T - 1);  // 1-based position T
  EXPECT_EQ(p.ecs, (ecs::Span{T, T + 4}));
  EXPECT_EQ(p.tokens[p.answer_cue_index], vocab().answer_cue_id());
}

TEST(Assemble, SpansDecodeToSourceText) {
  const ecs::PromptTemplate t;
  const auto s = mc_sample();
  for (auto pos : {FillerPosition::BeforeAnswerCue, FillerPosition::AfterAnswerCue}) {
    const auto p = ecs::assemble(s, FillerSpec{FillerKind::Tab, 7, pos}, t, vocab());
    auto decode = [&](const ecs::Span& span) {
      return vocab().decode(std::span(p.tokens).subspan(span.begin, span.size()));
    };
    EXPECT_EQ(decode(p.question), s.question);
    ASSERT_TRUE(p.context);
    EXPECT_EQ(decode(*p.context), *s.context);
    ASSERT_EQ(p.options.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(p.options[i].label, s.options[i].label);
      EXPECT_EQ(decode(p.options[i].span), s.options[i].text);
    }
    // Spans are disjoint and clear of the filler range.
    std::vector<ecs::Span> spans{p.question, *p.context, p.ecs};
    for (const auto& o : p.options) spans.push_back(o.span);
    for (std::size_t i = 0; i < spans.size(); ++i)
      for (std::size_t j = i + 1; j < spans.size(); ++j)
        EXPECT_TRUE(spans[i].end <= spans[j].begin || spans[j].end <= spans[i].begin);
  }
}

TEST(Assemble, CountIdentity) {
  const ecs::PromptTemplate t;
  for (std::size_t m : {0u, 1u, 5u, 64u, 300u})
    for (auto pos : {FillerPosition::BeforeAnswerCue, FillerPosition::AfterAnswerCue}) {
      const auto p = ecs::assemble(mc_sample(), FillerSpec{FillerKind::Enter, m, pos}, t, vocab());
      EXPECT_EQ(p.tokens.size() - p.base_length, m);
      EXPECT_EQ(p.filler_count(), m);
    }
}

TEST(Assemble, OverflowRaisesContextOverflow) {
  const ecs::PromptTemplate t;
  try {
    ecs::assemble(mc_sample(), FillerSpec{FillerKind::Space, 100, FillerPosition::BeforeAnswerCue}, t, vocab(), 64);
    FAIL();
  } catch (const ecs::Error& e) {
    EXPECT_EQ(e.code(), ecs::ErrorCode::ContextOverflow);
  }
}

TEST(Assemble, MathPromptCarriesRationaleBeforeCue) {
  ecs::TaskSample s;
  s.id = "m1";
  s.kind = ecs::TaskKind::FreeFormMath;
  s.question = "What is 2+3?";
  s.rationale = "2+3=5.";
  s.gold = "5";
  const auto p = ecs::assemble_baseline(s, ecs::PromptTemplate{}, vocab());
  const std::string text = vocab().decode(p.tokens);
  EXPECT_NE(text.find("Reasoning: 2+3=5.\n<eot><|assistant|>\nAnswer:"), std::string::npos) << text;
  EXPECT_TRUE(p.options.empty());
}

TEST(Template, OrderValidationAndJson) {
  ecs::PromptTemplate t;
  t.order = {ecs::Segment::Question, ecs::Segment::Instruction, ecs::Segment::AnswerCue};
  EXPECT_THROW(ecs::validate_template(t), ecs::Error);
  t.order = {ecs::Segment::Question, ecs::Segment::Options};
  EXPECT_THROW(ecs::validate_template(t), ecs::Error);

  ecs::PromptTemplate custom;
  custom.chat_prefix = "";
  custom.separator = "\n\n";
  custom.order = {ecs::Segment::Question, ecs::Segment::Options, ecs::Segment::AnswerCue};
  const auto back = ecs::template_from_json(nlohmann::json::parse(ecs::template_to_json(custom).dump()));
  EXPECT_EQ(ecs::template_to_json(back), ecs::template_to_json(custom));
  const auto p = ecs::assemble_baseline(mc_sample(), back, vocab());
  EXPECT_EQ(vocab().decode(p.tokens), "Question: Which option equals 2+3?\n\nA. 4\n\nB. 5\n\nC. 6\n\nD. 7\n\nAnswer:");
}

TEST(FillerSpecParse, Forms) {
  EXPECT_EQ(ecs::parse_filler_spec("space:16:before"), (FillerSpec{FillerKind::Space, 16, FillerPosition::BeforeAnswerCue}));
  EXPECT_EQ(ecs::parse_filler_spec("pad:0:after_answer_cue"), (FillerSpec{FillerKind::Pad, 0, FillerPosition::AfterAnswerCue}));
  EXPECT_THROW(ecs::parse_filler_spec("space:-1:before"), ecs::Error);
  EXPECT_THROW(ecs::parse_filler_spec("comma:1:before"), ecs::Error);
  EXPECT_THROW(ecs::parse_filler_spec("space:1"), ecs::Error);
}

TEST(ExtractEcs, ShapesAndSelection) {
  ecs::ForwardResult r;
  EXPECT_THROW(ecs::extract_ecs(r, ecs::PromptTokens{}), ecs::Error);

  ecs::PromptTokens p;
  p.tokens.assign(6, 0);
  p.ecs = {2, 5};
  r.hidden_states.emplace();
  for (int l = 0; l < 3; ++l) {
    ecs::Matrix h(6, 2);
    for (std::size_t t = 0; t < 6; ++t) h(t, 0) = h(t, 1) = 100.0 * l + static_cast<double>(t);
    r.hidden_states->push_back(h);
  }
  const auto e = ecs::extract_ecs(r, p);
  ASSERT_EQ(e.layers.size(), 3u);
  for (std::size_t l = 0; l < 3; ++l) {
    ASSERT_EQ(e.layers[l].rows(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(e.layers[l](i, 0), 100.0 * static_cast<double>(l) + 2.0 + static_cast<double>(i));
  }

  p.ecs = {6, 6};
  const auto empty = ecs::extract_ecs(r, p);
  for (const auto& m : empty.layers) EXPECT_EQ(m.rows(), 0u);
}

}  // namespace
