#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "ecs/datasets.hpp"
#include "ecs/evaluation.hpp"
#include "ecs/model.hpp"
#include "ecs/prompt.hpp"
#include "ecs/tokenizer.hpp"

namespace ecs {

// Everything needed to score one assembled prompt. All members are shared
// read-only across workers.
struct EvalContext {
  const ModelConfig& config;
  const WeightSet& weights;
  const Vocabulary& vocab;
  const PromptTemplate& tmpl;
  std::size_t max_new_tokens = 16;
};

struct SampleResult {
  RunRecord record;
  std::vector<double> logits;  // final-position logits of the prompt itself
  std::string generated;       // decoded continuation (math only)
};

inline SampleResult evaluate_prompt(const TaskSample& sample, const PromptTokens& prompt, const EvalContext& ctx,
                                    std::uint64_t seed) {
  SampleResult out;
  out.record.sample_id = sample.id;
  out.record.filler = prompt.filler;
  out.record.seed = seed;
  out.record.gold = sample.gold;

  const ForwardResult fr = forward(prompt.tokens, ctx.config, ctx.weights);
  out.logits = fr.logits;

  if (sample.kind == TaskKind::MultipleChoice) {
    std::vector<TokenId> option_ids;
    for (const auto& o : sample.options) {
      auto id = ctx.vocab.option_id(o.label);
      if (!id) fail(ErrorCode::ConfigError, std::string("vocabulary has no option token ") + o.label);
      option_ids.push_back(*id);
    }
    const ChoiceScore score = score_multiple_choice(fr.logits, option_ids);
    out.record.predicted = std::string(1, score.letter());
    out.record.option_probabilities = score.probabilities;
    out.record.correct = *out.record.predicted == sample.gold;
  } else {
    const std::unordered_set<TokenId> stops{ctx.vocab.eos_id(), ctx.vocab.eot_id()};
    const auto generated = greedy_decode(prompt.tokens, ctx.max_new_tokens, stops, ctx.config, ctx.weights);
    std::vector<TokenId> visible;
    for (TokenId t : generated)
      if (!stops.contains(t)) visible.push_back(t);
    out.generated = ctx.vocab.decode(visible);
    out.record.predicted = extract_math_answer(out.generated);
    out.record.correct = math_answer_matches(out.record.predicted, sample.gold);
  }
  return out;
}

// Filler path: assemble with `filler` (M may be 0) and score.
inline SampleResult evaluate_sample(const TaskSample& sample, const FillerSpec& filler, const EvalContext& ctx,
                                    std::uint64_t seed) {
  return evaluate_prompt(sample, assemble(sample, filler, ctx.tmpl, ctx.vocab, ctx.config.max_context()), ctx, seed);
}

// No-filler path. `label` only tags the record's group (its count is ignored).
inline SampleResult evaluate_baseline(const TaskSample& sample, const EvalContext& ctx, std::uint64_t seed,
                                      FillerSpec label = {}) {
  PromptTokens prompt = assemble_baseline(sample, ctx.tmpl, ctx.vocab);
  if (prompt.tokens.size() > ctx.config.max_context())
    fail(ErrorCode::ContextOverflow, "sample " + sample.id + " exceeds max_context");
  label.count = 0;
  prompt.filler = label;
  return evaluate_prompt(sample, prompt, ctx, seed);
}

}  // namespace ecs
