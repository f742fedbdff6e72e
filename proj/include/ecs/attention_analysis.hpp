#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ecs/error.hpp"
#include "ecs/prompt.hpp"
#include "ecs/svg.hpp"
#include "ecs/tensor.hpp"
#include "ecs/tokenizer.hpp"

namespace ecs {

inline constexpr int kPooledHead = -1;

struct RegionStats {
  std::size_t layer = 0;
  int head = 0;  // kPooledHead for the per-layer max over heads
  double ecs_row_mean = 0.0;
  double other_row_mean = 0.0;  // NaN when every row is an ECS row
  double mass_question = 0.0;
  std::array<std::optional<double>, 5> mass_option{};  // A..E, empty for absent options
  double mass_first_filler = 0.0;
  double mass_eot = 0.0;
  double uniformity = 0.0;
};

// Attention mass row `row` places on the columns of `span` (masked cells are zero).
inline double span_mass(const Matrix& map, std::size_t row, const Span& span) {
  double sum = 0.0;
  for (std::size_t j = span.begin; j < span.end && j <= row; ++j) sum += map(row, j);
  return sum;
}

struct RowMean {
  double sum = 0.0;
  std::size_t cells = 0;
  double mean() const { return cells ? sum / static_cast<double>(cells) : std::numeric_limits<double>::quiet_NaN(); }
};

// Sum and count over the unmasked (j <= i) cells of the selected rows.
template <class RowPredicate>
RowMean unmasked_row_mean(const Matrix& map, RowPredicate&& select) {
  RowMean m;
  for (std::size_t i = 0; i < map.rows(); ++i) {
    if (!select(i)) continue;
    for (std::size_t j = 0; j <= i; ++j) m.sum += map(i, j);
    m.cells += i + 1;
  }
  return m;
}

inline RegionStats head_region_stats(const Matrix& map, const PromptTokens& prompt, const Vocabulary& vocab,
                                     std::size_t layer, int head) {
  const Span& ecs = prompt.ecs;
  RegionStats s;
  s.layer = layer;
  s.head = head;
  s.ecs_row_mean = unmasked_row_mean(map, [&](std::size_t i) { return ecs.contains(i); }).mean();
  s.other_row_mean = unmasked_row_mean(map, [&](std::size_t i) { return !ecs.contains(i); }).mean();

  std::vector<std::size_t> eot_cols;
  for (std::size_t j = 0; j < prompt.tokens.size(); ++j)
    if (prompt.tokens[j] == vocab.eot_id()) eot_cols.push_back(j);

  std::array<double, 5> option_mass{};
  double question = 0.0, first = 0.0, eot = 0.0, uniformity = 0.0;
  for (std::size_t i = ecs.begin; i < ecs.end; ++i) {
    question += span_mass(map, i, prompt.question);
    for (const auto& opt : prompt.options)
      option_mass[kOptionLetters.find(opt.label)] += span_mass(map, i, opt.span);
    first += map(i, ecs.begin);
    for (std::size_t j : eot_cols)
      if (j <= i) eot += map(i, j);
    // Spread of this filler row over the visible original-input columns.
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t j = 0; j <= i; ++j) {
      if (ecs.contains(j)) continue;
      lo = std::min(lo, map(i, j));
      hi = std::max(hi, map(i, j));
    }
    if (hi >= lo) uniformity += hi - lo;
  }
  const double rows = static_cast<double>(ecs.size());
  s.mass_question = question / rows;
  for (const auto& opt : prompt.options) {
    const auto k = kOptionLetters.find(opt.label);
    s.mass_option[k] = option_mass[k] / rows;
  }
  s.mass_first_filler = first / rows;
  s.mass_eot = eot / rows;
  s.uniformity = uniformity / rows;
  return s;
}

// Field-wise maximum over the heads of one layer.
inline RegionStats pool_heads(std::span<const RegionStats> heads) {
  RegionStats p = heads.front();
  p.head = kPooledHead;
  auto fmax = [](double a, double b) { return std::isnan(a) ? b : (std::isnan(b) ? a : std::max(a, b)); };
  for (const auto& h : heads.subspan(1)) {
    p.ecs_row_mean = fmax(p.ecs_row_mean, h.ecs_row_mean);
    p.other_row_mean = fmax(p.other_row_mean, h.other_row_mean);
    p.mass_question = std::max(p.mass_question, h.mass_question);
    for (std::size_t k = 0; k < 5; ++k)
      if (p.mass_option[k] && h.mass_option[k]) p.mass_option[k] = std::max(*p.mass_option[k], *h.mass_option[k]);
    p.mass_first_filler = std::max(p.mass_first_filler, h.mass_first_filler);
    p.mass_eot = std::max(p.mass_eot, h.mass_eot);
    p.uniformity = std::max(p.uniformity, h.uniformity);
  }
  return p;
}

// Per-(layer, head) statistics followed, for each layer, by a pooled row.
// attentions is indexed [layer][head].
inline std::vector<RegionStats> region_stats(const std::vector<std::vector<Matrix>>& attentions,
                                             const PromptTokens& prompt, const Vocabulary& vocab) {
  if (prompt.ecs.empty()) fail(ErrorCode::EmptyRegion, "prompt has no expanded computation space (M = 0)");
  std::vector<RegionStats> out;
  for (std::size_t l = 0; l < attentions.size(); ++l) {
    std::vector<RegionStats> heads;
    for (std::size_t h = 0; h < attentions[l].size(); ++h) {
      const Matrix& map = attentions[l][h];
      if (map.rows() != prompt.tokens.size() || map.cols() != prompt.tokens.size())
        fail(ErrorCode::ConfigError, "attention map does not match prompt length");
      heads.push_back(head_region_stats(map, prompt, vocab, l, static_cast<int>(h)));
    }
    if (heads.empty()) continue;
    out.insert(out.end(), heads.begin(), heads.end());
    out.push_back(pool_heads(heads));
  }
  return out;
}

inline constexpr std::string_view kRegionStatsHeader =
    "layer,head,ecs_row_mean,other_row_mean,mass_question,mass_option_A,mass_option_B,mass_option_C,"
    "mass_option_D,mass_option_E,mass_first_filler,mass_eot,uniformity";

inline std::string format_region_stats_csv(std::span<const RegionStats> stats) {
  auto cell = [](double v) { return std::isnan(v) ? std::string() : fixed(v, 9); };
  std::string out = std::string(kRegionStatsHeader) + "\n";
  for (const auto& s : stats) {
    out += std::to_string(s.layer) + "," + (s.head == kPooledHead ? std::string("max") : std::to_string(s.head)) + ",";
    out += cell(s.ecs_row_mean) + "," + cell(s.other_row_mean) + "," + cell(s.mass_question) + ",";
    for (const auto& m : s.mass_option) out += (m ? cell(*m) : std::string()) + ",";
    out += cell(s.mass_first_filler) + "," + cell(s.mass_eot) + "," + cell(s.uniformity) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heatmap rendering
// ---------------------------------------------------------------------------

inline constexpr std::string_view kMaskedFill = "#c8c8c8";
inline constexpr std::string_view kEcsOutline = "#f2c200";
inline constexpr std::string_view kSpanRule = "#d62728";

// Log-scale colour from white (1e-6 and below) to dark blue (1.0).
inline std::string heat_color(double v) {
  constexpr double floor_log = -6.0;
  const double t = std::clamp((std::log10(std::max(v, 1e-6)) - floor_log) / -floor_log, 0.0, 1.0);
  auto channel = [t](int lo, int hi) { return static_cast<int>(std::lround(lo + (hi - lo) * t)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", channel(0xf7, 0x08), channel(0xfb, 0x30), channel(0xff, 0x6b));
  return buf;
}

inline std::string render_heatmap_svg(const Matrix& map, const PromptTokens& prompt, std::size_t layer, std::size_t head) {
  const std::size_t n = map.rows();
  if (n == 0 || map.cols() != n) fail(ErrorCode::ConfigError, "attention map must be square and nonempty");
  if (n != prompt.tokens.size()) fail(ErrorCode::ConfigError, "attention map side does not match prompt length");

  const double cell = std::clamp(std::floor(768.0 / static_cast<double>(n)), 1.0, 16.0);
  const double margin = 24.0;
  const double side = cell * static_cast<double>(n);
  SvgWriter svg(side + 2 * margin, side + 2 * margin);
  svg.text(margin, margin - 8.0, "L" + std::to_string(layer) + " H" + std::to_string(head));

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = margin + cell * static_cast<double>(j), y = margin + cell * static_cast<double>(i);
      if (j > i)
        svg.rect(x, y, cell, cell, kMaskedFill, "masked");
      else
        svg.rect(x, y, cell, cell, heat_color(map(i, j)), "cell");
    }

  auto rule = [&](std::size_t at) {
    const double p = margin + cell * static_cast<double>(at);
    svg.line(p, margin, p, margin + side, kSpanRule, 0.5, "span");
    svg.line(margin, p, margin + side, p, kSpanRule, 0.5, "span");
  };
  std::vector<std::size_t> bounds;
  auto add_span = [&](const Span& s) {
    if (s.empty()) return;
    bounds.push_back(s.begin);
    bounds.push_back(s.end);
  };
  if (prompt.context) add_span(*prompt.context);
  add_span(prompt.question);
  for (const auto& o : prompt.options) add_span(o.span);
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
  for (std::size_t b : bounds)
    if (b > 0 && b < n) rule(b);

  if (!prompt.ecs.empty()) {
    const double b = margin + cell * static_cast<double>(prompt.ecs.begin);
    const double w = cell * static_cast<double>(prompt.ecs.size());
    svg.rect(margin, b, side, w, "none", "ecs", kEcsOutline, 1.5);
    svg.rect(b, b, w, margin + side - b, "none", "ecs", kEcsOutline, 1.5);
  }
  return svg.finish();
}

inline void render_heatmap(const Matrix& map, const PromptTokens& prompt, std::size_t layer, std::size_t head,
                           const std::filesystem::path& path) {
  write_text_file(path, render_heatmap_svg(map, prompt, layer, head));
}

inline std::string heatmap_filename(std::size_t layer, std::size_t head) {
  return "attn_L" + std::to_string(layer) + "_H" + std::to_string(head) + ".svg";
}

}  // namespace ecs
