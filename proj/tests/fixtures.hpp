#pragma once

// Record fixtures whose pooled accuracies hit fixed reporting targets
// exactly at three decimals.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecs/evaluation.hpp"

namespace fixture {

inline void append_group(std::vector<ecs::RunRecord>& out, ecs::FillerSpec filler, std::size_t per_seed,
                         const std::vector<std::size_t>& correct_per_seed) {
  for (std::size_t seed = 0; seed < correct_per_seed.size(); ++seed)
    for (std::size_t i = 0; i < per_seed; ++i) {
      ecs::RunRecord r;
      r.sample_id = "s" + std::to_string(i);
      r.filler = filler;
      r.seed = seed;
      r.gold = "A";
      r.correct = i < correct_per_seed[seed];
      r.predicted = r.correct ? "A" : "B";
      out.push_back(r);
    }
}

struct TableCase {
  const char* name;
  std::size_t per_seed;
  std::vector<std::size_t> baseline_correct;
  std::vector<std::size_t> filled_correct;
  double baseline, filled, delta;
};

// MMLU-style and ARC-style groups: baseline and M=64.
inline const std::vector<TableCase>& table_cases() {
  static const std::vector<TableCase> cases{
      {"mmlu", 762, {310, 310, 309}, {335, 335, 334}, 40.639, 43.920, 3.281},
      {"arc", 1172, {501, 501, 501}, {621, 621, 621}, 42.747, 52.986, 10.239},
  };
  return cases;
}

inline std::vector<ecs::RunRecord> table_records(const TableCase& c) {
  std::vector<ecs::RunRecord> out;
  const auto pos = ecs::FillerPosition::BeforeAnswerCue;
  append_group(out, {ecs::FillerKind::Space, 0, pos}, c.per_seed, c.baseline_correct);
  append_group(out, {ecs::FillerKind::Space, 64, pos}, c.per_seed, c.filled_correct);
  return out;
}

struct ExtractionCase {
  std::string input;
  std::optional<std::string> expected;
  std::string note;
};

inline std::vector<ExtractionCase> extraction_cases() {
  std::ifstream in(std::string(ECS_TEST_DATA_DIR) + "/math_extraction_cases.jsonl");
  std::vector<ExtractionCase> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    ExtractionCase c;
    c.input = j.at("input").get<std::string>();
    if (!j.at("expected").is_null()) c.expected = j.at("expected").get<std::string>();
    c.note = j.value("note", "");
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace fixture
