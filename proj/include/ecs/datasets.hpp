#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ecs/error.hpp"
#include "ecs/tokenizer.hpp"
#include "ecs/util.hpp"

namespace ecs {

enum class TaskKind : std::uint8_t { MultipleChoice, FreeFormMath };

inline std::string_view to_string(TaskKind k) {
  return k == TaskKind::MultipleChoice ? "multiple_choice" : "free_form_math";
}

inline TaskKind parse_task_kind(std::string_view s) {
  if (s == "multiple_choice" || s == "mc") return TaskKind::MultipleChoice;
  if (s == "free_form_math" || s == "math") return TaskKind::FreeFormMath;
  fail(ErrorCode::ConfigError, "unknown task kind '" + std::string(s) + "'");
}

struct AnswerOption {
  char label = 'A';
  std::string text;
  friend bool operator==(const AnswerOption&, const AnswerOption&) = default;
};

struct TaskSample {
  std::string id;
  TaskKind kind = TaskKind::MultipleChoice;
  std::optional<std::string> context;
  std::string question;
  std::vector<AnswerOption> options;
  std::string gold;
  std::optional<std::string> rationale;
  std::optional<std::string> category;

  friend bool operator==(const TaskSample&, const TaskSample&) = default;
};

struct SampleIssue {
  ErrorCode code;
  std::string message;
};

// nullopt when the sample satisfies every TaskSample invariant.
inline std::optional<SampleIssue> check_sample(const TaskSample& s) {
  if (s.id.empty()) return SampleIssue{ErrorCode::SchemaError, "missing id"};
  if (s.question.empty()) return SampleIssue{ErrorCode::SchemaError, "empty question"};
  if (s.kind == TaskKind::MultipleChoice) {
    if (s.options.size() < 3 || s.options.size() > 5)
      return SampleIssue{ErrorCode::SchemaError,
                         "multiple_choice needs 3-5 options, got " + std::to_string(s.options.size())};
    for (std::size_t i = 0; i < s.options.size(); ++i)
      if (s.options[i].label != kOptionLetters[i])
        return SampleIssue{ErrorCode::SchemaError, "option labels must run A, B, C, ... in order"};
    const bool gold_ok = s.gold.size() == 1 &&
                         std::any_of(s.options.begin(), s.options.end(),
                                     [&](const AnswerOption& o) { return o.label == s.gold[0]; });
    if (!gold_ok) return SampleIssue{ErrorCode::SchemaError, "gold '" + s.gold + "' is not among the option labels"};
  } else {
    if (s.gold.empty()) return SampleIssue{ErrorCode::SchemaError, "free_form_math needs a nonempty gold answer"};
    if (!s.options.empty()) return SampleIssue{ErrorCode::SchemaError, "free_form_math samples carry no options"};
  }
  return std::nullopt;
}

inline nlohmann::ordered_json sample_to_json(const TaskSample& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["context"] = s.context ? nlohmann::ordered_json(*s.context) : nlohmann::ordered_json(nullptr);
  j["question"] = s.question;
  j["options"] = nlohmann::ordered_json::array();
  for (const auto& o : s.options) j["options"].push_back({{"label", std::string(1, o.label)}, {"text", o.text}});
  j["gold"] = s.gold;
  j["rationale"] = s.rationale ? nlohmann::ordered_json(*s.rationale) : nlohmann::ordered_json(nullptr);
  if (s.category) j["category"] = *s.category;
  return j;
}

inline std::string serialize_sample(const TaskSample& s) { return sample_to_json(s).dump(); }

// Throws RecordError for structurally bad records; invariants are checked separately.
inline TaskSample sample_from_json(const nlohmann::json& j, TaskKind kind) {
  auto opt_string = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) fail(ErrorCode::RecordError, std::string("field '") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  auto req_string = [&](const char* key) {
    auto v = opt_string(key);
    if (!v) fail(ErrorCode::RecordError, std::string("missing field '") + key + "'");
    return *v;
  };

  if (!j.is_object()) fail(ErrorCode::RecordError, "record is not an object");
  TaskSample s;
  s.kind = kind;
  s.id = req_string("id");
  s.context = opt_string("context");
  s.question = req_string("question");
  // Numeric gold values are common in converted math sets.
  if (j.contains("gold") && j["gold"].is_number_integer()) {
    s.gold = std::to_string(j["gold"].get<long long>());
  } else {
    s.gold = req_string("gold");
  }
  s.rationale = opt_string("rationale");
  s.category = opt_string("category");
  if (j.contains("options") && !j["options"].is_null()) {
    if (!j["options"].is_array()) fail(ErrorCode::RecordError, "field 'options' must be an array");
    for (const auto& o : j["options"]) {
      if (!o.is_object() || !o.contains("label") || !o.contains("text") || !o["label"].is_string() ||
          !o["text"].is_string())
        fail(ErrorCode::RecordError, "each option needs string 'label' and 'text'");
      const auto label = o["label"].get<std::string>();
      if (label.size() != 1) fail(ErrorCode::RecordError, "option label must be a single letter");
      s.options.push_back({label[0], o["text"].get<std::string>()});
    }
  }
  return s;
}

struct RecordIssue {
  std::size_t line = 0;
  ErrorCode code = ErrorCode::RecordError;
  std::string message;
};

struct LoadReport {
  std::vector<TaskSample> samples;
  std::vector<RecordIssue> issues;

  bool ok() const noexcept { return issues.empty(); }
};

// Line-delimited records. Invalid lines are reported in `issues` with their
// 1-based line number; only valid samples reach `samples`.
inline LoadReport parse_samples(std::istream& in, TaskKind kind) {
  LoadReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      TaskSample s = sample_from_json(nlohmann::json::parse(line), kind);
      if (auto issue = check_sample(s)) {
        report.issues.push_back({line_no, issue->code, s.id + ": " + issue->message});
        continue;
      }
      report.samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      report.issues.push_back({line_no, ErrorCode::RecordError, e.what()});
    } catch (const Error& e) {
      std::string msg = e.what();
      msg.erase(0, to_string(e.code()).size() + 2);
      report.issues.push_back({line_no, e.code(), std::move(msg)});
    }
  }
  return report;
}

inline LoadReport load_samples(const std::filesystem::path& path, TaskKind kind) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open dataset " + path.string());
  return parse_samples(in, kind);
}

inline void save_samples(const std::filesystem::path& path, const std::vector<TaskSample>& samples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& s : samples) out << serialize_sample(s) << '\n';
}

// Trivially solvable arithmetic items. Pure function of (seed, n, kind).
inline std::vector<TaskSample> generate_synthetic(std::uint64_t seed, std::size_t n, TaskKind kind) {
  if (n < 1) fail(ErrorCode::PreconditionError, "n must be >= 1");
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<TaskSample> out;
  out.reserve(n);
  const std::string prefix = kind == TaskKind::MultipleChoice ? "syn-mc-" : "syn-math-";
  for (std::size_t i = 0; i < n; ++i) {
    TaskSample s;
    s.id = prefix + std::to_string(seed) + "-" + std::to_string(i);
    s.kind = kind;
    s.category = "synthetic";
    const std::int64_t a = rng.range(1, 20), b = rng.range(1, 20);
    const bool multiply = rng.below(3) == 0;
    const std::int64_t answer = multiply ? a * b : a + b;
    const std::string expr = std::to_string(a) + (multiply ? "*" : "+") + std::to_string(b);

    if (kind == TaskKind::MultipleChoice) {
      s.question = "Which option equals " + expr + "?";
      const std::size_t count = 3 + rng.below(3);
      const std::size_t gold_pos = rng.below(count);
      std::vector<std::int64_t> values;
      while (values.size() + 1 < count) {
        const std::int64_t v = answer + rng.range(-6, 6);
        if (v < 0 || v == answer || std::find(values.begin(), values.end(), v) != values.end()) continue;
        values.push_back(v);
      }
      values.insert(values.begin() + static_cast<std::ptrdiff_t>(gold_pos), answer);
      for (std::size_t k = 0; k < count; ++k) s.options.push_back({kOptionLetters[k], std::to_string(values[k])});
      s.gold = std::string(1, kOptionLetters[gold_pos]);
    } else {
      s.question = "What is " + expr + "?";
      s.rationale = expr + "=" + std::to_string(answer) + ".";
      s.gold = std::to_string(answer);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ecs
