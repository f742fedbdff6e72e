#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ecs/datasets.hpp"
#include "ecs/error.hpp"
#include "ecs/model.hpp"
#include "ecs/tokenizer.hpp"

namespace ecs {

enum class FillerPosition : std::uint8_t { BeforeAnswerCue, AfterAnswerCue };

inline std::string_view to_string(FillerPosition p) {
  return p == FillerPosition::BeforeAnswerCue ? "before_answer_cue" : "after_answer_cue";
}

inline FillerPosition parse_filler_position(std::string_view s) {
  if (s == "before_answer_cue" || s == "before") return FillerPosition::BeforeAnswerCue;
  if (s == "after_answer_cue" || s == "after") return FillerPosition::AfterAnswerCue;
  fail(ErrorCode::ConfigError, "unknown filler position '" + std::string(s) + "'");
}

struct FillerSpec {
  FillerKind kind = FillerKind::Space;
  std::size_t count = 0;
  FillerPosition position = FillerPosition::BeforeAnswerCue;

  friend bool operator==(const FillerSpec&, const FillerSpec&) = default;
};

// "<kind>:<count>:<position>", e.g. "space:16:before".
inline FillerSpec parse_filler_spec(std::string_view text) {
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
  if (c2 == std::string_view::npos) fail(ErrorCode::ConfigError, "filler spec must be <kind>:<count>:<position>");
  FillerSpec spec;
  spec.kind = parse_filler_kind(text.substr(0, c1));
  const std::string count(text.substr(c1 + 1, c2 - c1 - 1));
  if (count.empty() || count.find_first_not_of("0123456789") != std::string::npos)
    fail(ErrorCode::ConfigError, "filler count must be a non-negative integer");
  spec.count = std::stoul(count);
  spec.position = parse_filler_position(text.substr(c2 + 1));
  return spec;
}

// Half-open [begin, end) token index interval.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return begin == end; }
  bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
  friend bool operator==(const Span&, const Span&) = default;
};

enum class Segment : std::uint8_t { ChatPrefix, Instruction, Context, Question, Options, Rationale, ChatSuffix, AnswerCue };

inline constexpr std::array<Segment, 8> kCanonicalOrder = {
    Segment::ChatPrefix, Segment::Instruction, Segment::Context, Segment::Question,
    Segment::Options, Segment::Rationale, Segment::ChatSuffix, Segment::AnswerCue};

inline std::string_view to_string(Segment s) {
  switch (s) {
    case Segment::ChatPrefix: return "chat_prefix";
    case Segment::Instruction: return "instruction";
    case Segment::Context: return "context";
    case Segment::Question: return "question";
    case Segment::Options: return "options";
    case Segment::Rationale: return "rationale";
    case Segment::ChatSuffix: return "chat_suffix";
    case Segment::AnswerCue: return "answer_cue";
  }
  return "question";
}

inline Segment parse_segment(std::string_view s) {
  for (Segment seg : kCanonicalOrder)
    if (to_string(seg) == s) return seg;
  fail(ErrorCode::ConfigError, "unknown prompt segment '" + std::string(s) + "'");
}

struct PromptTemplate {
  std::string chat_prefix = "<|user|>";
  std::string instruction = "Choose the correct option.";
  std::string math_instruction = "Solve the following problem.";
  std::string context_prefix = "Context: ";
  std::string question_prefix = "Question: ";
  std::string option_separator = ". ";  // between label and option text
  std::string rationale_prefix = "Reasoning: ";
  std::string chat_suffix = "<eot><|assistant|>";
  std::string separator = "\n";
  std::vector<Segment> order{kCanonicalOrder.begin(), kCanonicalOrder.end()};
};

// Segments must appear in canonical relative order, include the question,
// and end with the answer cue.
inline void validate_template(const PromptTemplate& t) {
  if (t.order.empty() || t.order.back() != Segment::AnswerCue)
    fail(ErrorCode::ConfigError, "template order must end with answer_cue");
  if (std::find(t.order.begin(), t.order.end(), Segment::Question) == t.order.end())
    fail(ErrorCode::ConfigError, "template order must include question");
  auto rank = [](Segment s) { return std::find(kCanonicalOrder.begin(), kCanonicalOrder.end(), s) - kCanonicalOrder.begin(); };
  for (std::size_t i = 1; i < t.order.size(); ++i)
    if (rank(t.order[i - 1]) >= rank(t.order[i]))
      fail(ErrorCode::ConfigError, "template segment '" + std::string(to_string(t.order[i])) +
                                       "' is out of order or repeated");
}

inline PromptTemplate template_from_json(const nlohmann::json& j) {
  PromptTemplate t;
  auto read = [&](const char* key, std::string& field) {
    if (!j.contains(key)) return;
    if (!j[key].is_string()) fail(ErrorCode::ConfigError, std::string("template field '") + key + "' must be a string");
    field = j[key].get<std::string>();
  };
  if (!j.is_object()) fail(ErrorCode::ConfigError, "template must be an object");
  read("chat_prefix", t.chat_prefix);
  read("instruction", t.instruction);
  read("math_instruction", t.math_instruction);
  read("context_prefix", t.context_prefix);
  read("question_prefix", t.question_prefix);
  read("option_separator", t.option_separator);
  read("rationale_prefix", t.rationale_prefix);
  read("chat_suffix", t.chat_suffix);
  read("separator", t.separator);
  if (j.contains("order")) {
    t.order.clear();
    for (const auto& s : j["order"]) t.order.push_back(parse_segment(s.get<std::string>()));
  }
  validate_template(t);
  return t;
}

inline nlohmann::ordered_json template_to_json(const PromptTemplate& t) {
  nlohmann::ordered_json j;
  j["chat_prefix"] = t.chat_prefix;
  j["instruction"] = t.instruction;
  j["math_instruction"] = t.math_instruction;
  j["context_prefix"] = t.context_prefix;
  j["question_prefix"] = t.question_prefix;
  j["option_separator"] = t.option_separator;
  j["rationale_prefix"] = t.rationale_prefix;
  j["chat_suffix"] = t.chat_suffix;
  j["separator"] = t.separator;
  j["order"] = nlohmann::ordered_json::array();
  for (Segment s : t.order) j["order"].push_back(to_string(s));
  return j;
}

inline PromptTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open template " + path.string());
  try {
    return template_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

struct OptionSpan {
  char label = 'A';
  Span span;
};

// x_{1:T+M} plus the bookkeeping needed to locate the expanded space.
// All indices are 0-based.
struct PromptTokens {
  std::vector<TokenId> tokens;
  std::size_t base_length = 0;  // T
  FillerSpec filler;
  Span ecs;                     // |ecs| == M
  std::size_t answer_cue_index = 0;
  Span question;
  std::optional<Span> context;
  std::vector<OptionSpan> options;

  std::size_t filler_count() const noexcept { return ecs.size(); }

  // Index in `tokens` of the i-th token of the filler-free assembly.
  std::size_t original_position(std::size_t i) const noexcept { return i < ecs.begin ? i : i + ecs.size(); }
};

namespace detail {

inline void append(std::vector<TokenId>& dst, const std::vector<TokenId>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace detail

// Filler-free assembly: chat prefix, instruction, context, question, options,
// rationale, chat suffix, answer cue; one separator between nonempty segments.
inline PromptTokens assemble_baseline(const TaskSample& sample, const PromptTemplate& tmpl, const Vocabulary& vocab) {
  validate_template(tmpl);
  PromptTokens p;
  const auto sep = vocab.encode(tmpl.separator);
  auto& toks = p.tokens;
  auto begin_segment = [&] {
    if (!toks.empty()) detail::append(toks, sep);
  };

  for (Segment seg : tmpl.order) {
    switch (seg) {
      case Segment::ChatPrefix:
        if (!tmpl.chat_prefix.empty()) {
          begin_segment();
          detail::append(toks, vocab.encode(tmpl.chat_prefix));
        }
        break;
      case Segment::Instruction: {
        const auto& text = sample.kind == TaskKind::MultipleChoice ? tmpl.instruction : tmpl.math_instruction;
        if (!text.empty()) {
          begin_segment();
          detail::append(toks, vocab.encode(text));
        }
        break;
      }
      case Segment::Context:
        if (sample.context && !sample.context->empty()) {
          begin_segment();
          detail::append(toks, vocab.encode(tmpl.context_prefix));
          const std::size_t b = toks.size();
          detail::append(toks, vocab.encode(*sample.context));
          p.context = Span{b, toks.size()};
        }
        break;
      case Segment::Question: {
        begin_segment();
        detail::append(toks, vocab.encode(tmpl.question_prefix));
        const std::size_t b = toks.size();
        detail::append(toks, vocab.encode(sample.question));
        p.question = Span{b, toks.size()};
        break;
      }
      case Segment::Options:
        for (const auto& opt : sample.options) {
          begin_segment();
          const auto label_id = vocab.option_id(opt.label);
          if (!label_id) fail(ErrorCode::ConfigError, std::string("vocabulary has no option token ") + opt.label);
          toks.push_back(*label_id);
          detail::append(toks, vocab.encode(tmpl.option_separator));
          const std::size_t b = toks.size();
          detail::append(toks, vocab.encode(opt.text));
          p.options.push_back({opt.label, Span{b, toks.size()}});
        }
        break;
      case Segment::Rationale:
        if (sample.rationale && !sample.rationale->empty()) {
          begin_segment();
          detail::append(toks, vocab.encode(tmpl.rationale_prefix));
          detail::append(toks, vocab.encode(*sample.rationale));
        }
        break;
      case Segment::ChatSuffix:
        if (!tmpl.chat_suffix.empty()) {
          begin_segment();
          detail::append(toks, vocab.encode(tmpl.chat_suffix));
        }
        break;
      case Segment::AnswerCue:
        begin_segment();
        p.answer_cue_index = toks.size();
        toks.push_back(vocab.answer_cue_id());
        break;
    }
  }
  p.base_length = toks.size();
  p.ecs = Span{toks.size(), toks.size()};
  return p;
}

// Baseline assembly with `filler.count` filler ids inserted contiguously
// directly before the answer cue (which then ends the sequence) or directly
// after it. Throws ContextOverflow when the result exceeds max_context.
inline PromptTokens assemble(const TaskSample& sample, const FillerSpec& filler, const PromptTemplate& tmpl,
                             const Vocabulary& vocab, std::optional<std::size_t> max_context = std::nullopt) {
  PromptTokens p = assemble_baseline(sample, tmpl, vocab);
  p.filler = filler;
  const auto fill = filler_ids(vocab, filler.kind, filler.count);
  const std::size_t m = fill.size();
  if (filler.position == FillerPosition::BeforeAnswerCue) {
    const std::size_t at = p.answer_cue_index;
    p.tokens.insert(p.tokens.begin() + static_cast<std::ptrdiff_t>(at), fill.begin(), fill.end());
    p.ecs = Span{at, at + m};
    p.answer_cue_index = at + m;
  } else {
    const std::size_t at = p.tokens.size();
    p.tokens.insert(p.tokens.end(), fill.begin(), fill.end());
    p.ecs = Span{at, at + m};
  }
  if (max_context && p.tokens.size() > *max_context)
    fail(ErrorCode::ContextOverflow, "sample " + sample.id + ": assembled length " + std::to_string(p.tokens.size()) +
                                         " exceeds max_context " + std::to_string(*max_context));
  return p;
}

// Z_{1:M} for every captured layer: the hidden-state rows at the filler positions.
struct EcsTensor {
  std::vector<Matrix> layers;  // L+1 entries of M x D
};

inline EcsTensor extract_ecs(const ForwardResult& result, const PromptTokens& prompt) {
  if (!result.hidden_states) fail(ErrorCode::CaptureMissing, "forward pass did not capture hidden states");
  EcsTensor out;
  out.layers.reserve(result.hidden_states->size());
  for (const Matrix& h : *result.hidden_states) {
    if (h.rows() != prompt.tokens.size())
      fail(ErrorCode::ConfigError, "hidden states cover " + std::to_string(h.rows()) + " positions, prompt has " +
                                       std::to_string(prompt.tokens.size()));
    Matrix z(prompt.ecs.size(), h.cols());
    for (std::size_t i = 0; i < prompt.ecs.size(); ++i) {
      auto src = h.row(prompt.ecs.begin + i);
      std::copy(src.begin(), src.end(), z.row(i).begin());
    }
    out.layers.push_back(std::move(z));
  }
  return out;
}

}  // namespace ecs
