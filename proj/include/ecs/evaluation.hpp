#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "ecs/error.hpp"
#include "ecs/model.hpp"
#include "ecs/prompt.hpp"
#include "ecs/tokenizer.hpp"
#include "ecs/util.hpp"

namespace ecs {

// ---------------------------------------------------------------------------
// Multiple choice: softmax restricted to the option-letter logits.
// ---------------------------------------------------------------------------

struct ChoiceScore {
  std::vector<double> probabilities;  // one per option, in label order A, B, ...
  std::size_t predicted = 0;
  char letter() const noexcept { return kOptionLetters[predicted]; }
};

inline ChoiceScore score_multiple_choice(std::span<const double> logits, std::span<const TokenId> option_ids) {
  if (option_ids.size() < 3 || option_ids.size() > 5)
    fail(ErrorCode::ConfigError, "expected 3-5 option ids, got " + std::to_string(option_ids.size()));
  for (std::size_t i = 0; i < option_ids.size(); ++i) {
    if (option_ids[i] >= logits.size())
      fail(ErrorCode::UnknownToken, "option id " + std::to_string(option_ids[i]) + " is outside the vocabulary");
    for (std::size_t j = 0; j < i; ++j)
      if (option_ids[i] == option_ids[j])
        fail(ErrorCode::ConfigError, "duplicate option id " + std::to_string(option_ids[i]));
  }

  std::vector<double> selected(option_ids.size());
  for (std::size_t i = 0; i < option_ids.size(); ++i) selected[i] = logits[option_ids[i]];

  ChoiceScore out;
  // First maximum wins, so ties resolve to the lowest letter.
  out.predicted = argmax(selected);
  const double max_logit = selected[out.predicted];
  double denom = 0.0;
  out.probabilities.resize(selected.size());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    out.probabilities[i] = std::exp(selected[i] - max_logit);
    denom += out.probabilities[i];
  }
  for (double& p : out.probabilities) p /= denom;
  return out;
}

// ---------------------------------------------------------------------------
// Free-form math answer extraction.
//
// Rules, first hit wins:
//   1. content of the last \boxed{...} (brace matched), normalized;
//   2. first number after the last case-insensitive "answer is";
//   3. first number after the last "####";
//   4. last number anywhere.
// A number is an optional '-', an optional currency sign ($, \$, £, €),
// digits with optional ",ddd" groups, an optional decimal part and an
// optional "/digits" denominator. Normalization drops currency signs,
// thousands separators, surrounding whitespace and trailing periods.
// ---------------------------------------------------------------------------

namespace detail {

inline const std::regex& number_pattern() {
  static const std::regex re(R"(-?(?:\\\$|\$|£|€)?\d+(?:,\d{3})*(?:\.\d+)?(?:/\d+)?)");
  return re;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline void erase_all(std::string& s, std::string_view needle) {
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos)) s.erase(pos, needle.size());
}

inline std::string normalize_number(std::string s) {
  erase_all(s, "\\$");
  erase_all(s, "$");
  erase_all(s, "£");
  erase_all(s, "€");
  erase_all(s, ",");
  return s;
}

inline std::optional<std::string> first_number(std::string_view text) {
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, number_pattern())) return std::nullopt;
  return normalize_number(m.str());
}

inline std::optional<std::string> last_number(std::string_view text) {
  std::optional<std::string> last;
  using It = std::regex_iterator<std::string_view::const_iterator>;
  for (It it(text.begin(), text.end(), number_pattern()), end; it != end; ++it) last = it->str();
  if (!last) return std::nullopt;
  return normalize_number(*last);
}

inline std::optional<std::string> last_boxed(std::string_view text) {
  constexpr std::string_view tag = "\\boxed{";
  const auto start = text.rfind(tag);
  if (start == std::string_view::npos) return std::nullopt;
  std::size_t depth = 1;
  const std::size_t open = start + tag.size();
  for (std::size_t i = open; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) return std::string(text.substr(open, i - open));
  }
  return std::nullopt;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

// Canonical form of a free-standing answer string (also applied to gold).
inline std::string normalize_answer(std::string_view raw) {
  std::string s = detail::trim(raw);
  while (!s.empty() && s.back() == '.') s.pop_back();
  s = detail::trim(s);
  detail::erase_all(s, "\\$");
  detail::erase_all(s, "$");
  detail::erase_all(s, "£");
  detail::erase_all(s, "€");
  s = detail::trim(s);
  static const std::regex grouped(R"(-?\d{1,3}(?:,\d{3})+(?:\.\d+)?)");
  if (std::regex_match(s, grouped)) detail::erase_all(s, ",");
  return s;
}

inline std::optional<std::string> extract_math_answer(std::string_view generated) {
  if (auto boxed = detail::last_boxed(generated)) {
    std::string s = normalize_answer(*boxed);
    if (!s.empty()) return s;
  }
  const std::string low = detail::lower(generated);
  if (const auto at = low.rfind("answer is"); at != std::string::npos)
    if (auto n = detail::first_number(generated.substr(at + 9))) return n;
  if (const auto at = generated.rfind("####"); at != std::string_view::npos)
    if (auto n = detail::first_number(generated.substr(at + 4))) return n;
  return detail::last_number(generated);
}

inline bool math_answer_matches(const std::optional<std::string>& predicted, std::string_view gold) {
  return predicted && *predicted == normalize_answer(gold);
}

// ---------------------------------------------------------------------------
// Run records and aggregation.
// ---------------------------------------------------------------------------

struct RunRecord {
  std::string sample_id;
  FillerSpec filler;
  std::uint64_t seed = 0;
  std::optional<std::string> predicted;
  std::string gold;
  bool correct = false;
  std::vector<double> option_probabilities;  // multiple choice only, label order

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

inline nlohmann::ordered_json record_to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["sample_id"] = r.sample_id;
  j["kind"] = to_string(r.filler.kind);
  j["M"] = r.filler.count;
  j["position"] = to_string(r.filler.position);
  j["seed"] = r.seed;
  j["predicted"] = r.predicted ? nlohmann::ordered_json(*r.predicted) : nlohmann::ordered_json(nullptr);
  j["gold"] = r.gold;
  j["correct"] = r.correct;
  if (!r.option_probabilities.empty()) {
    nlohmann::ordered_json probs;
    for (std::size_t i = 0; i < r.option_probabilities.size(); ++i)
      probs[std::string(1, kOptionLetters[i])] = r.option_probabilities[i];
    j["option_probs"] = probs;
  }
  return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  try {
    RunRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.filler.kind = parse_filler_kind(j.at("kind").get<std::string>());
    r.filler.count = j.at("M").get<std::size_t>();
    r.filler.position = parse_filler_position(j.at("position").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("predicted").is_null()) r.predicted = j.at("predicted").get<std::string>();
    r.gold = j.at("gold").get<std::string>();
    r.correct = j.at("correct").get<bool>();
    if (j.contains("option_probs"))
      for (char c : kOptionLetters) {
        const std::string key(1, c);
        if (!j["option_probs"].contains(key)) break;
        r.option_probabilities.push_back(j["option_probs"][key].get<double>());
      }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::RecordError, std::string("bad run record: ") + e.what());
  }
}

struct GroupKey {
  FillerKind kind = FillerKind::Space;
  std::size_t count = 0;
  FillerPosition position = FillerPosition::BeforeAnswerCue;

  auto tie() const { return std::tuple(static_cast<int>(kind), static_cast<int>(position), count); }
  friend bool operator<(const GroupKey& a, const GroupKey& b) { return a.tie() < b.tie(); }
  friend bool operator==(const GroupKey& a, const GroupKey& b) { return a.tie() == b.tie(); }
};

struct AggregateRow {
  std::string checkpoint;  // empty outside checkpoint sweeps
  GroupKey key;
  std::size_t seed_count = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;  // percent, unrounded
  double baseline = 0.0;  // percent, unrounded
  double delta_pp = 0.0;  // rounded(accuracy) - rounded(baseline), at reporting precision
  bool improved = false;
};

struct AggregateReport {
  std::vector<AggregateRow> rows;  // sorted by (kind, position, M)
};

inline constexpr int kReportDecimals = 3;

// Pooled accuracy per (kind, M, position) group. Every group must carry the
// same seed set with the same number of records per seed, so the pooled
// value equals the mean of per-seed accuracies.
inline AggregateReport aggregate(std::span<const RunRecord> records) {
  if (records.empty()) fail(ErrorCode::NoData, "no run records to aggregate");
  struct Tally {
    std::map<std::uint64_t, std::size_t> per_seed;
    std::size_t correct = 0, total = 0;
  };
  std::map<GroupKey, Tally> groups;
  for (const auto& r : records) {
    auto& t = groups[GroupKey{r.filler.kind, r.filler.count, r.filler.position}];
    ++t.per_seed[r.seed];
    ++t.total;
    if (r.correct) ++t.correct;
  }

  std::set<std::uint64_t> seeds;
  for (const auto& [s, n] : groups.begin()->second.per_seed) seeds.insert(s);
  for (const auto& [key, t] : groups) {
    std::set<std::uint64_t> mine;
    for (const auto& [s, n] : t.per_seed) mine.insert(s);
    if (mine != seeds) fail(ErrorCode::ConfigError, "groups do not share the same seed set");
    const std::size_t first = t.per_seed.begin()->second;
    for (const auto& [s, n] : t.per_seed)
      if (n != first) fail(ErrorCode::ConfigError, "seeds within a group have different record counts");
  }

  AggregateReport report;
  for (const auto& [key, t] : groups) {
    auto base = groups.find(GroupKey{key.kind, 0, key.position});
    if (base == groups.end())
      fail(ErrorCode::MissingBaseline, "no M=0 group for " + std::string(to_string(key.kind)) + "/" +
                                           std::string(to_string(key.position)));
    AggregateRow row;
    row.key = key;
    row.seed_count = t.per_seed.size();
    row.correct = t.correct;
    row.total = t.total;
    row.accuracy = 100.0 * static_cast<double>(t.correct) / static_cast<double>(t.total);
    row.baseline = 100.0 * static_cast<double>(base->second.correct) / static_cast<double>(base->second.total);
    row.delta_pp = round_to(round_to(row.accuracy, kReportDecimals) - round_to(row.baseline, kReportDecimals),
                            kReportDecimals);
    row.improved = row.delta_pp > 0.0;
    report.rows.push_back(row);
  }
  return report;
}

inline constexpr std::string_view kAggregateHeader = "kind,M,position,seed_count,accuracy,baseline,delta_pp,improved";

inline std::string format_aggregate_row(const AggregateRow& r) {
  return std::string(to_string(r.key.kind)) + "," + std::to_string(r.key.count) + "," +
         std::string(to_string(r.key.position)) + "," + std::to_string(r.seed_count) + "," +
         fixed(r.accuracy, kReportDecimals) + "," + fixed(r.baseline, kReportDecimals) + "," +
         fixed(r.delta_pp, kReportDecimals) + "," + (r.improved ? "true" : "false");
}

// CSV with the header above; a leading `checkpoint` column is added when
// any row carries a checkpoint label.
inline std::string format_aggregate_csv(const AggregateReport& report) {
  const bool with_ckpt = std::any_of(report.rows.begin(), report.rows.end(),
                                     [](const AggregateRow& r) { return !r.checkpoint.empty(); });
  std::string out = with_ckpt ? "checkpoint," + std::string(kAggregateHeader) + "\n" : std::string(kAggregateHeader) + "\n";
  for (const auto& r : report.rows) {
    if (with_ckpt) out += r.checkpoint + ",";
    out += format_aggregate_row(r) + "\n";
  }
  return out;
}

}  // namespace ecs
