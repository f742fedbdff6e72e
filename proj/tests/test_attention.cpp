#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "ecs/attention_analysis.hpp"
#include "ecs/datasets.hpp"
#include "ecs/model.hpp"

namespace {

using ecs::Matrix;
using ecs::Span;

const ecs::Vocabulary& vocab() {
  static const ecs::Vocabulary v = ecs::default_vocabulary();
  return v;
}

// Tag balance and attribute quoting; enough to catch malformed output.
bool well_formed_xml(const std::string& doc) {
  std::vector<std::string> stack;
  static const std::regex tag(R"(<(/?)([A-Za-z][\w:-]*)((?:\s+[\w:-]+="[^"<]*")*)\s*(/?)>)");
  std::size_t pos = 0;
  bool root_seen = false;
  while (true) {
    const auto lt = doc.find('<', pos);
    if (lt == std::string::npos) break;
    if (doc.compare(lt, 5, "<?xml") == 0) {
      pos = doc.find("?>", lt);
      if (pos == std::string::npos) return false;
      continue;
    }
    std::smatch m;
    const std::string rest = doc.substr(lt);
    if (!std::regex_search(rest, m, tag, std::regex_constants::match_continuous)) return false;
    if (m[1].length()) {
      if (stack.empty() || stack.back() != m[2].str()) return false;
      stack.pop_back();
    } else if (!m[4].length()) {
      if (stack.empty() && root_seen) return false;
      root_seen = true;
      stack.push_back(m[2].str());
    }
    pos = lt + static_cast<std::size_t>(m[0].length());
  }
  return root_seen && stack.empty();
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

ecs::PromptTokens tiny_prompt(std::size_t n, Span ecs_span, Span question) {
  ecs::PromptTokens p;
  p.tokens.assign(n, vocab().find("a").value());
  p.ecs = ecs_span;
  p.question = question;
  return p;
}

Matrix uniform_causal(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) m(i, j) = 1.0 / static_cast<double>(i + 1);
  return m;
}

TEST(RegionStats, TwoByTwoExample) {
  Matrix m(2, 2);
  m(0, 0) = 1.0;
  m(1, 0) = 0.5;
  m(1, 1) = 0.5;
  const auto p = tiny_prompt(2, {1, 2}, {0, 1});
  const auto s = ecs::head_region_stats(m, p, vocab(), 0, 0);
  EXPECT_DOUBLE_EQ(s.ecs_row_mean, 0.5);
  EXPECT_DOUBLE_EQ(s.other_row_mean, 1.0);
  EXPECT_DOUBLE_EQ(s.mass_question, 0.5);
  EXPECT_DOUBLE_EQ(s.mass_first_filler, 0.5);
}

TEST(RegionStats, UniformAttentionHasZeroUniformityAndConsistentMeans) {
  const std::size_t n = 12;
  const auto p = tiny_prompt(n, {8, 12}, {2, 6});
  const auto s = ecs::head_region_stats(uniform_causal(n), p, vocab(), 0, 0);
  EXPECT_NEAR(s.uniformity, 0.0, 1e-15);
  // Each row sums to 1 over i+1 visible cells.
  double rows = 0, cells = 0;
  for (std::size_t i = 8; i < 12; ++i) {
    rows += 1;
    cells += static_cast<double>(i + 1);
  }
  EXPECT_NEAR(s.ecs_row_mean, rows / cells, 1e-15);
  double q = 0;
  for (std::size_t i = 8; i < 12; ++i) q += 4.0 / static_cast<double>(i + 1);
  EXPECT_NEAR(s.mass_question, q / 4.0, 1e-15);
}

TEST(RegionStats, PartitionOfUnityOnModelAttention) {
  const auto cfg = ecs::ModelConfig(ecs::ModelParams{.num_layers = 2, .hidden_dim = 16, .num_heads = 2, .ffn_dim = 32});
  const auto w = ecs::random_weights(cfg, 5);
  std::vector<ecs::TokenId> tokens;
  ecs::Rng rng(1);
  for (int i = 0; i < 20; ++i) tokens.push_back(static_cast<ecs::TokenId>(rng.below(cfg.vocab_size())));
  const auto r = ecs::forward(tokens, cfg, w, {.attentions = true});
  // Regions that tile [0, 20): prefix, question, two options, gap, ECS.
  const std::vector<Span> tiles{{0, 3}, {3, 7}, {7, 9}, {9, 11}, {11, 14}, {14, 20}};
  for (const auto& layer : *r.attentions)
    for (const auto& map : layer)
      for (std::size_t i = 14; i < 20; ++i) {
        double total = 0;
        for (const auto& t : tiles) total += ecs::span_mass(map, i, t);
        EXPECT_NEAR(total, 1.0, 1e-9);
      }
}

TEST(RegionStats, EmptyRegionAndPooledRows) {
  const auto p0 = tiny_prompt(4, {4, 4}, {0, 2});
  std::vector<std::vector<Matrix>> maps{{uniform_causal(4)}};
  try {
    ecs::region_stats(maps, p0, vocab());
    FAIL();
  } catch (const ecs::Error& e) {
    EXPECT_EQ(e.code(), ecs::ErrorCode::EmptyRegion);
  }
  Matrix sharp(4, 4);
  for (std::size_t i = 0; i < 4; ++i) sharp(i, 0) = 1.0;
  const auto p = tiny_prompt(4, {2, 4}, {0, 2});
  const std::vector<std::vector<Matrix>> two{{uniform_causal(4), sharp}, {sharp, sharp}};
  const auto stats = ecs::region_stats(two, p, vocab());
  ASSERT_EQ(stats.size(), 6u);
  EXPECT_EQ(stats[2].head, ecs::kPooledHead);
  EXPECT_DOUBLE_EQ(stats[2].mass_question, std::max(stats[0].mass_question, stats[1].mass_question));
  EXPECT_DOUBLE_EQ(stats[2].uniformity, stats[1].uniformity);
  const auto csv = ecs::format_region_stats_csv(stats);
  EXPECT_EQ(count(csv, "\n"), 7u);
  EXPECT_NE(csv.find("\n0,max,"), std::string::npos);
}

TEST(Heatmap, SingleCellIsWellFormed) {
  Matrix m(1, 1);
  m(0, 0) = 1.0;
  const auto svg = ecs::render_heatmap_svg(m, tiny_prompt(1, {1, 1}, {0, 1}), 0, 0);
  EXPECT_TRUE(well_formed_xml(svg)) << svg;
  EXPECT_EQ(count(svg, "class=\"masked\""), 0u);
  EXPECT_EQ(count(svg, "class=\"cell\""), 1u);
}

TEST(Heatmap, FourByFourMasksSixCells) {
  const auto p = tiny_prompt(4, {2, 4}, {0, 2});
  const auto svg = ecs::render_heatmap_svg(uniform_causal(4), p, 1, 3);
  EXPECT_TRUE(well_formed_xml(svg));
  EXPECT_EQ(count(svg, "class=\"masked\""), 6u);
  EXPECT_EQ(count(svg, "class=\"cell\""), 10u);
  EXPECT_EQ(count(svg, "class=\"ecs\""), 2u);
  EXPECT_EQ(svg, ecs::render_heatmap_svg(uniform_causal(4), p, 1, 3));
  EXPECT_EQ(ecs::heatmap_filename(1, 3), "attn_L1_H3.svg");
}

TEST(Heatmap, WritesFileAndReportsIoError) {
  const auto dir = std::filesystem::temp_directory_path() / "ecs_heatmap_test";
  std::filesystem::create_directories(dir);
  const auto p = tiny_prompt(3, {1, 3}, {0, 1});
  const auto path = dir / ecs::heatmap_filename(0, 0);
  ecs::render_heatmap(uniform_causal(3), p, 0, 0, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), ecs::render_heatmap_svg(uniform_causal(3), p, 0, 0));
  try {
    ecs::render_heatmap(uniform_causal(3), p, 0, 0, dir / "missing" / "x.svg");
    FAIL();
  } catch (const ecs::Error& e) {
    EXPECT_EQ(e.code(), ecs::ErrorCode::IoError);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
