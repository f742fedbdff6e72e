#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ecs/error.hpp"
#include "ecs/model.hpp"

namespace ecs {

enum class FillerKind : std::uint8_t { Space, Enter, Tab, Period, Pad, Dash };

inline constexpr std::array<FillerKind, 6> kAllFillerKinds = {
    FillerKind::Space, FillerKind::Enter, FillerKind::Tab,
    FillerKind::Period, FillerKind::Pad, FillerKind::Dash};

inline std::string_view to_string(FillerKind k) {
  switch (k) {
    case FillerKind::Space: return "space";
    case FillerKind::Enter: return "enter";
    case FillerKind::Tab: return "tab";
    case FillerKind::Period: return "period";
    case FillerKind::Pad: return "pad";
    case FillerKind::Dash: return "dash";
  }
  return "space";
}

inline std::optional<FillerKind> try_parse_filler_kind(std::string_view s) {
  for (FillerKind k : kAllFillerKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline FillerKind parse_filler_kind(std::string_view s) {
  if (auto k = try_parse_filler_kind(s)) return *k;
  fail(ErrorCode::ConfigError, "unknown filler kind '" + std::string(s) + "'");
}

inline constexpr std::string_view kOptionLetters = "ABCDE";

enum class TokenClass : std::uint8_t { Normal, Special, Filler, Option, AnswerCue };

struct VocabEntry {
  TokenId id = 0;
  std::string text;
  TokenClass cls = TokenClass::Normal;
  FillerKind filler = FillerKind::Space;  // meaningful for TokenClass::Filler
  char option = 'A';                      // meaningful for TokenClass::Option
};

inline std::string escape_token(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::optional<std::string> unescape_token(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) return std::nullopt;
    switch (s[i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case '\\': out += '\\'; break;
      default: return std::nullopt;
    }
  }
  return out;
}

// Byte length of the UTF-8 sequence introduced by `lead` (1 for invalid leads).
inline std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

// Immutable id <-> string table with filler, option and answer-cue registries.
class Vocabulary {
 public:
  static constexpr std::string_view kPad = "<pad>";
  static constexpr std::string_view kEos = "<eos>";
  static constexpr std::string_view kEot = "<eot>";
  static constexpr std::string_view kUnknown = "<unk>";
  static constexpr std::string_view kAnswerCue = "Answer:";

  explicit Vocabulary(std::vector<VocabEntry> entries) {
    entries_.resize(entries.size());
    std::vector<bool> seen(entries.size(), false);
    for (auto& e : entries) {
      if (e.id >= entries.size() || seen[e.id])
        fail(ErrorCode::ConfigError, "vocabulary ids must be unique and cover 0.." + std::to_string(entries.size() - 1));
      if (e.text.empty()) fail(ErrorCode::ConfigError, "empty vocabulary entry at id " + std::to_string(e.id));
      seen[e.id] = true;
      const TokenId id = e.id;
      entries_[id] = std::move(e);
    }
    for (const auto& e : entries_) {
      if (!lookup_.emplace(e.text, e.id).second)
        fail(ErrorCode::ConfigError, "duplicate vocabulary string '" + escape_token(e.text) + "'");
      max_len_ = std::max(max_len_, e.text.size());
      switch (e.cls) {
        case TokenClass::Filler: fillers_[static_cast<std::size_t>(e.filler)] = e.id; break;
        case TokenClass::Option: {
          const auto pos = kOptionLetters.find(e.option);
          if (pos == std::string_view::npos) fail(ErrorCode::ConfigError, "option letter must be A-E");
          options_[pos] = e.id;
          break;
        }
        case TokenClass::AnswerCue: answer_cue_ = e.id; break;
        default: break;
      }
    }
    eos_ = require(kEos);
    eot_ = require(kEot);
    unknown_ = require(kUnknown);
    pad_ = find(kPad).value_or(eos_);
    if (!answer_cue_) fail(ErrorCode::ConfigError, "vocabulary lacks an answer_cue entry");
  }

  std::size_t size() const noexcept { return entries_.size(); }
  const VocabEntry& entry(TokenId id) const { return entries_.at(id); }
  const std::vector<VocabEntry>& entries() const noexcept { return entries_; }

  std::optional<TokenId> find(std::string_view text) const {
    auto it = lookup_.find(std::string(text));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  TokenId pad_id() const noexcept { return pad_; }
  TokenId eos_id() const noexcept { return eos_; }
  TokenId eot_id() const noexcept { return eot_; }
  TokenId unknown_id() const noexcept { return unknown_; }
  TokenId answer_cue_id() const noexcept { return *answer_cue_; }

  std::optional<TokenId> filler_id(FillerKind k) const { return fillers_[static_cast<std::size_t>(k)]; }

  std::optional<TokenId> option_id(char letter) const {
    const auto pos = kOptionLetters.find(letter);
    if (pos == std::string_view::npos) return std::nullopt;
    return options_[pos];
  }

  // Copy whose registry maps `kind` onto an existing id, e.g. pad -> <eos>
  // for models that ship without a dedicated pad token.
  Vocabulary with_filler_alias(FillerKind kind, TokenId target) const {
    if (target >= size()) fail(ErrorCode::UnknownToken, "alias target " + std::to_string(target) + " is out of vocabulary");
    Vocabulary copy = *this;
    copy.fillers_[static_cast<std::size_t>(kind)] = target;
    return copy;
  }

  // Longest match over vocabulary strings; an unmatched UTF-8 codepoint
  // becomes one unknown id.
  std::vector<TokenId> encode(std::string_view text) const {
    std::vector<TokenId> out;
    std::size_t i = 0;
    while (i < text.size()) {
      bool matched = false;
      for (std::size_t len = std::min(max_len_, text.size() - i); len > 0; --len) {
        auto it = lookup_.find(std::string(text.substr(i, len)));
        if (it != lookup_.end()) {
          out.push_back(it->second);
          i += len;
          matched = true;
          break;
        }
      }
      if (!matched) {
        out.push_back(unknown_);
        i += std::min(utf8_length(static_cast<unsigned char>(text[i])), text.size() - i);
      }
    }
    return out;
  }

  std::string decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
      if (id >= size()) fail(ErrorCode::UnknownToken, "token id " + std::to_string(id) + " is out of vocabulary");
      out += entries_[id].text;
    }
    return out;
  }

 private:
  TokenId require(std::string_view text) const {
    auto id = find(text);
    if (!id) fail(ErrorCode::ConfigError, "vocabulary lacks required entry " + std::string(text));
    return *id;
  }

  std::vector<VocabEntry> entries_;
  std::unordered_map<std::string, TokenId> lookup_;
  std::size_t max_len_ = 0;
  std::array<std::optional<TokenId>, 6> fillers_{};
  std::array<std::optional<TokenId>, 5> options_{};
  std::optional<TokenId> answer_cue_;
  TokenId pad_ = 0, eos_ = 0, eot_ = 0, unknown_ = 0;
};

// Exactly `count` copies of the registered filler id.
inline std::vector<TokenId> filler_ids(const Vocabulary& vocab, FillerKind kind, std::size_t count) {
  auto id = vocab.filler_id(kind);
  if (!id) fail(ErrorCode::MissingFiller, "no token registered for filler kind " + std::string(to_string(kind)));
  return std::vector<TokenId>(count, *id);
}

inline std::string class_label(const VocabEntry& e) {
  switch (e.cls) {
    case TokenClass::Normal: return "normal";
    case TokenClass::Special: return "special";
    case TokenClass::Filler: return "filler:" + std::string(to_string(e.filler));
    case TokenClass::Option: return std::string("option:") + e.option;
    case TokenClass::AnswerCue: return "answer_cue";
  }
  return "normal";
}

inline void parse_class_label(std::string_view label, VocabEntry& e) {
  if (label == "normal") {
    e.cls = TokenClass::Normal;
  } else if (label == "special") {
    e.cls = TokenClass::Special;
  } else if (label == "answer_cue") {
    e.cls = TokenClass::AnswerCue;
  } else if (label.starts_with("filler:")) {
    auto kind = try_parse_filler_kind(label.substr(7));
    if (!kind) fail(ErrorCode::ConfigError, "unknown filler kind in class '" + std::string(label) + "'");
    e.cls = TokenClass::Filler;
    e.filler = *kind;
  } else if (label.starts_with("option:") && label.size() == 8 &&
             kOptionLetters.find(label[7]) != std::string_view::npos) {
    e.cls = TokenClass::Option;
    e.option = label[7];
  } else {
    fail(ErrorCode::ConfigError, "unknown token class '" + std::string(label) + "'");
  }
}

// One `<id>\t<escaped-string>\t<class>` line per entry, in id order.
inline std::string format_vocabulary(const Vocabulary& vocab) {
  std::string out;
  for (const auto& e : vocab.entries())
    out += std::to_string(e.id) + "\t" + escape_token(e.text) + "\t" + class_label(e) + "\n";
  return out;
}

inline Vocabulary parse_vocabulary(std::string_view text, const std::string& source = "<memory>") {
  std::vector<VocabEntry> entries;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(line_no);
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos)
      fail(ErrorCode::ConfigError, where + ": expected <id>\\t<string>\\t<class>");
    VocabEntry e;
    try {
      std::size_t used = 0;
      const auto id = std::stoul(line.substr(0, t1), &used);
      if (used != t1) throw std::invalid_argument("id");
      e.id = static_cast<TokenId>(id);
    } catch (const std::exception&) {
      fail(ErrorCode::ConfigError, where + ": invalid id");
    }
    auto text_field = unescape_token(std::string_view(line).substr(t1 + 1, t2 - t1 - 1));
    if (!text_field) fail(ErrorCode::ConfigError, where + ": invalid escape sequence");
    e.text = std::move(*text_field);
    parse_class_label(std::string_view(line).substr(t2 + 1), e);
    entries.push_back(std::move(e));
  }
  return Vocabulary(std::move(entries));
}

inline Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open vocabulary " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_vocabulary(buf.str(), path.string());
}

inline void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << format_vocabulary(vocab);
}

// Built-in 512-entry word/char hybrid vocabulary matching the default
// ModelConfig. Every filler is a single entry so one filler is one token.
inline Vocabulary default_vocabulary(std::size_t target_size = 512) {
  std::vector<VocabEntry> entries;
  auto add = [&](std::string text, TokenClass cls, FillerKind filler = FillerKind::Space, char option = 'A') {
    VocabEntry e;
    e.id = static_cast<TokenId>(entries.size());
    e.text = std::move(text);
    e.cls = cls;
    e.filler = filler;
    e.option = option;
    entries.push_back(std::move(e));
  };

  add("<pad>", TokenClass::Filler, FillerKind::Pad);
  add("<eos>", TokenClass::Special);
  add("<eot>", TokenClass::Special);
  add("<unk>", TokenClass::Special);
  add("<|system|>", TokenClass::Special);
  add("<|user|>", TokenClass::Special);
  add("<|assistant|>", TokenClass::Special);
  add(" ", TokenClass::Filler, FillerKind::Space);
  add("\n", TokenClass::Filler, FillerKind::Enter);
  add("\t", TokenClass::Filler, FillerKind::Tab);
  add(".", TokenClass::Filler, FillerKind::Period);
  add("-", TokenClass::Filler, FillerKind::Dash);
  for (char c : kOptionLetters) add(std::string(1, c), TokenClass::Option, FillerKind::Space, c);
  add(std::string(Vocabulary::kAnswerCue), TokenClass::AnswerCue);

  for (char c = '0'; c <= '9'; ++c) add(std::string(1, c), TokenClass::Normal);
  for (char c = 'a'; c <= 'z'; ++c) add(std::string(1, c), TokenClass::Normal);
  for (char c = 'F'; c <= 'Z'; ++c) add(std::string(1, c), TokenClass::Normal);
  for (std::string_view p : {",", "?", "!", ":", ";", "(", ")", "+", "=", "*", "/", "$", "'", "\"", "%",
                             "#", "{", "}", "[", "]", "\\", "_", "<", ">", "&", "@", "^", "~", "|"})
    add(std::string(p), TokenClass::Normal);
  for (std::string_view w :
       {"Question:", "Options:", "Context:", "Instruction:", "Reasoning:", "The", "the", "answer", "is",
        "Which", "which", "option", "equals", "What", "what", "of", "and", "to", "in", "sum", "total",
        "cost", "plus", "minus", "times", "each", "has", "how", "many", "How", "If", "if", "then",
        "Solve", "problem", "following", "Choose", "correct", "question", "step", "by", "Let", "think",
        "so", "are", "was", "for", "with", "on", "that", "this", "be", "as", "at", "from", "or", "an",
        "not", "\\boxed", "apples", "dollars", "more", "than", "less", "number", "value", "result",
        "You", "you", "helpful", "assistant", "Select", "letter", "multiple", "choice", "math", "Compute"})
    add(std::string(w), TokenClass::Normal);
  for (int n = 10; entries.size() < target_size; ++n) add(std::to_string(n), TokenClass::Normal);
  return Vocabulary(std::move(entries));
}

}  // namespace ecs
