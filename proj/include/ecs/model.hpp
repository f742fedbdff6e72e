#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ecs/error.hpp"
#include "ecs/tensor.hpp"
#include "ecs/util.hpp"

namespace ecs {

using TokenId = std::uint32_t;

enum class NormPlacement : std::uint8_t { Pre = 0, Post = 1 };
enum class PositionalScheme : std::uint8_t { Rotary = 0, LearnedAbsolute = 1, None = 2 };

inline std::string_view to_string(NormPlacement p) { return p == NormPlacement::Pre ? "pre" : "post"; }

inline std::string_view to_string(PositionalScheme s) {
  switch (s) {
    case PositionalScheme::Rotary: return "rotary";
    case PositionalScheme::LearnedAbsolute: return "learned-absolute";
    case PositionalScheme::None: return "none";
  }
  return "none";
}

inline NormPlacement parse_norm_placement(std::string_view s) {
  if (s == "pre") return NormPlacement::Pre;
  if (s == "post") return NormPlacement::Post;
  fail(ErrorCode::ConfigError, "unknown norm placement '" + std::string(s) + "'");
}

inline PositionalScheme parse_positional_scheme(std::string_view s) {
  if (s == "rotary") return PositionalScheme::Rotary;
  if (s == "learned-absolute") return PositionalScheme::LearnedAbsolute;
  if (s == "none") return PositionalScheme::None;
  fail(ErrorCode::ConfigError, "unknown positional scheme '" + std::string(s) + "'");
}

// Plain parameter bag; ModelConfig validates it once and then stays immutable.
struct ModelParams {
  std::uint32_t num_layers = 4;
  std::uint32_t hidden_dim = 64;
  std::uint32_t num_heads = 4;
  std::uint32_t ffn_dim = 256;
  std::uint32_t vocab_size = 512;
  std::uint32_t max_context = 2048;
  NormPlacement norm_placement = NormPlacement::Pre;
  PositionalScheme positional_scheme = PositionalScheme::Rotary;
};

class ModelConfig {
 public:
  ModelConfig() : ModelConfig(ModelParams{}) {}

  explicit ModelConfig(const ModelParams& p) : p_(p) {
    if (p.num_layers == 0) fail(ErrorCode::ConfigError, "num_layers must be positive");
    if (p.hidden_dim == 0) fail(ErrorCode::ConfigError, "hidden_dim must be positive");
    if (p.num_heads == 0 || p.hidden_dim % p.num_heads != 0)
      fail(ErrorCode::ConfigError, "num_heads must divide hidden_dim");
    if (p.ffn_dim == 0) fail(ErrorCode::ConfigError, "ffn_dim must be positive");
    if (p.vocab_size == 0) fail(ErrorCode::ConfigError, "vocab_size must be positive");
    if (p.max_context == 0) fail(ErrorCode::ConfigError, "max_context must be >= 1");
    if (p.positional_scheme == PositionalScheme::Rotary && (p.hidden_dim / p.num_heads) % 2 != 0)
      fail(ErrorCode::ConfigError, "rotary positions need an even head dimension");
  }

  std::size_t num_layers() const noexcept { return p_.num_layers; }
  std::size_t hidden_dim() const noexcept { return p_.hidden_dim; }
  std::size_t num_heads() const noexcept { return p_.num_heads; }
  std::size_t head_dim() const noexcept { return p_.hidden_dim / p_.num_heads; }
  std::size_t ffn_dim() const noexcept { return p_.ffn_dim; }
  std::size_t vocab_size() const noexcept { return p_.vocab_size; }
  std::size_t max_context() const noexcept { return p_.max_context; }
  NormPlacement norm_placement() const noexcept { return p_.norm_placement; }
  PositionalScheme positional_scheme() const noexcept { return p_.positional_scheme; }
  const ModelParams& params() const noexcept { return p_; }

  friend bool operator==(const ModelConfig& a, const ModelConfig& b) {
    const auto& x = a.p_;
    const auto& y = b.p_;
    return x.num_layers == y.num_layers && x.hidden_dim == y.hidden_dim &&
           x.num_heads == y.num_heads && x.ffn_dim == y.ffn_dim && x.vocab_size == y.vocab_size &&
           x.max_context == y.max_context && x.norm_placement == y.norm_placement &&
           x.positional_scheme == y.positional_scheme;
  }

 private:
  ModelParams p_;
};

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kRotaryBase = 10000.0;

struct LayerWeights {
  std::vector<double> norm1_gamma, norm1_beta;
  Matrix wq, wk, wv, wo;  // D x D each, applied as x * W
  std::vector<double> norm2_gamma, norm2_beta;
  Matrix ff_w1;  // D x F
  std::vector<double> ff_b1;
  Matrix ff_w2;  // F x D
  std::vector<double> ff_b2;
};

struct WeightSet {
  Matrix token_embedding;     // |V| x D
  Matrix position_embedding;  // max_context x D, learned-absolute only
  std::vector<LayerWeights> layers;
  std::vector<double> final_gamma, final_beta;  // used by pre-norm models
  Matrix output_head;                           // D x |V|
};

namespace detail {

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

inline void check_matrix(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols)
    fail(ErrorCode::WeightError, name + " has shape " + std::to_string(m.rows()) + "x" +
                                     std::to_string(m.cols()) + ", expected " + std::to_string(rows) +
                                     "x" + std::to_string(cols));
  if (!all_finite(m.data())) fail(ErrorCode::WeightError, name + " contains non-finite values");
}

inline void check_vector(const std::vector<double>& v, std::size_t n, const std::string& name) {
  if (v.size() != n)
    fail(ErrorCode::WeightError,
         name + " has length " + std::to_string(v.size()) + ", expected " + std::to_string(n));
  if (!all_finite(v)) fail(ErrorCode::WeightError, name + " contains non-finite values");
}

}  // namespace detail

// Throws WeightError on any shape mismatch or non-finite entry.
inline void validate_weights(const ModelConfig& cfg, const WeightSet& w) {
  const std::size_t d = cfg.hidden_dim(), f = cfg.ffn_dim(), v = cfg.vocab_size();
  detail::check_matrix(w.token_embedding, v, d, "token_embedding");
  if (cfg.positional_scheme() == PositionalScheme::LearnedAbsolute)
    detail::check_matrix(w.position_embedding, cfg.max_context(), d, "position_embedding");
  else if (!w.position_embedding.empty())
    fail(ErrorCode::WeightError, "position_embedding present for a non-learned positional scheme");
  if (w.layers.size() != cfg.num_layers())
    fail(ErrorCode::WeightError, "expected " + std::to_string(cfg.num_layers()) + " layers, got " +
                                     std::to_string(w.layers.size()));
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const auto& lw = w.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    detail::check_vector(lw.norm1_gamma, d, p + "norm1_gamma");
    detail::check_vector(lw.norm1_beta, d, p + "norm1_beta");
    detail::check_matrix(lw.wq, d, d, p + "wq");
    detail::check_matrix(lw.wk, d, d, p + "wk");
    detail::check_matrix(lw.wv, d, d, p + "wv");
    detail::check_matrix(lw.wo, d, d, p + "wo");
    detail::check_vector(lw.norm2_gamma, d, p + "norm2_gamma");
    detail::check_vector(lw.norm2_beta, d, p + "norm2_beta");
    detail::check_matrix(lw.ff_w1, d, f, p + "ff_w1");
    detail::check_vector(lw.ff_b1, f, p + "ff_b1");
    detail::check_matrix(lw.ff_w2, f, d, p + "ff_w2");
    detail::check_vector(lw.ff_b2, d, p + "ff_b2");
  }
  detail::check_vector(w.final_gamma, d, "final_gamma");
  detail::check_vector(w.final_beta, d, "final_beta");
  detail::check_matrix(w.output_head, d, v, "output_head");
}

// Seeded weights: every matrix and bias uniform in [-scale, scale]; norm
// scales are 1 + uniform and norm shifts uniform.
inline WeightSet random_weights(const ModelConfig& cfg, std::uint64_t seed, double scale = 0.05) {
  Rng rng(seed);
  const std::size_t d = cfg.hidden_dim(), f = cfg.ffn_dim(), v = cfg.vocab_size();
  auto mat = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& x : m.data()) x = rng.uniform(-scale, scale);
    return m;
  };
  auto vec = [&](std::size_t n, double offset) {
    std::vector<double> out(n);
    for (double& x : out) x = offset + rng.uniform(-scale, scale);
    return out;
  };

  WeightSet w;
  w.token_embedding = mat(v, d);
  if (cfg.positional_scheme() == PositionalScheme::LearnedAbsolute)
    w.position_embedding = mat(cfg.max_context(), d);
  w.layers.reserve(cfg.num_layers());
  for (std::size_t l = 0; l < cfg.num_layers(); ++l) {
    LayerWeights lw;
    lw.norm1_gamma = vec(d, 1.0);
    lw.norm1_beta = vec(d, 0.0);
    lw.wq = mat(d, d);
    lw.wk = mat(d, d);
    lw.wv = mat(d, d);
    lw.wo = mat(d, d);
    lw.norm2_gamma = vec(d, 1.0);
    lw.norm2_beta = vec(d, 0.0);
    lw.ff_w1 = mat(d, f);
    lw.ff_b1 = vec(f, 0.0);
    lw.ff_w2 = mat(f, d);
    lw.ff_b2 = vec(d, 0.0);
    w.layers.push_back(std::move(lw));
  }
  w.final_gamma = vec(d, 1.0);
  w.final_beta = vec(d, 0.0);
  w.output_head = mat(d, v);
  return w;
}

struct CaptureFlags {
  bool hidden_states = false;
  bool attentions = false;
};

struct ForwardResult {
  std::vector<double> logits;                                  // |V|, final position
  std::optional<std::vector<Matrix>> hidden_states;            // L+1 of seq x D
  std::optional<std::vector<std::vector<Matrix>>> attentions;  // [layer][head] seq x seq
};

struct BlockOutput {
  Matrix output;
  std::vector<Matrix> attention;  // one seq x seq map per head
};

inline void layer_norm_row(std::span<const double> x, std::span<const double> gamma,
                           std::span<const double> beta, std::span<double> out) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
}

inline Matrix layer_norm(const Matrix& x, std::span<const double> gamma, std::span<const double> beta) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) layer_norm_row(x.row(r), gamma, beta, out.row(r));
  return out;
}

inline double gelu(double x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

// Rotates consecutive (even, odd) pairs of each head slice by position-dependent angles.
inline void apply_rotary(Matrix& x, std::size_t num_heads, std::size_t head_dim) {
  const std::size_t half = head_dim / 2;
  std::vector<double> inv_freq(half);
  for (std::size_t i = 0; i < half; ++i)
    inv_freq[i] = std::pow(kRotaryBase, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
  for (std::size_t pos = 0; pos < x.rows(); ++pos) {
    auto row = x.row(pos);
    for (std::size_t i = 0; i < half; ++i) {
      const double angle = static_cast<double>(pos) * inv_freq[i];
      const double c = std::cos(angle), s = std::sin(angle);
      for (std::size_t h = 0; h < num_heads; ++h) {
        double& a = row[h * head_dim + 2 * i];
        double& b = row[h * head_dim + 2 * i + 1];
        const double a0 = a, b0 = b;
        a = a0 * c - b0 * s;
        b = a0 * s + b0 * c;
      }
    }
  }
}

// Causal multi-head self-attention over the rows of x. Masked (upper
// triangular) cells of each returned map are exactly zero.
inline Matrix causal_attention(const Matrix& x, const LayerWeights& lw, const ModelConfig& cfg,
                               std::vector<Matrix>& maps) {
  const std::size_t seq = x.rows(), nh = cfg.num_heads(), hd = cfg.head_dim();
  Matrix q = matmul(x, lw.wq);
  Matrix k = matmul(x, lw.wk);
  const Matrix v = matmul(x, lw.wv);
  if (cfg.positional_scheme() == PositionalScheme::Rotary) {
    apply_rotary(q, nh, hd);
    apply_rotary(k, nh, hd);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Matrix context(seq, cfg.hidden_dim());
  maps.assign(nh, Matrix(seq, seq));
  std::vector<double> scores(seq);
  for (std::size_t h = 0; h < nh; ++h) {
    Matrix& map = maps[h];
    const std::size_t off = h * hd;
    for (std::size_t i = 0; i < seq; ++i) {
      double max_score = -INFINITY;
      for (std::size_t j = 0; j <= i; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < hd; ++c) dot += q(i, off + c) * k(j, off + c);
        scores[j] = dot * scale;
        max_score = std::max(max_score, scores[j]);
      }
      double denom = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        scores[j] = std::exp(scores[j] - max_score);
        denom += scores[j];
      }
      for (std::size_t j = 0; j <= i; ++j) {
        const double p = scores[j] / denom;
        map(i, j) = p;
        for (std::size_t c = 0; c < hd; ++c) context(i, off + c) += p * v(j, off + c);
      }
    }
  }
  return matmul(context, lw.wo);
}

inline Matrix feed_forward(const Matrix& x, const LayerWeights& lw) {
  Matrix hidden = matmul(x, lw.ff_w1);
  for (std::size_t r = 0; r < hidden.rows(); ++r) {
    auto row = hidden.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = gelu(row[c] + lw.ff_b1[c]);
  }
  Matrix out = matmul(hidden, lw.ff_w2);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += lw.ff_b2[c];
  }
  return out;
}

// One transformer block.
//   post-norm: a = LN1(Attn(z) + z);      z' = LN2(FF(a) + a)
//   pre-norm:  a = z + Attn(LN1(z));      z' = a + FF(LN2(a))
inline BlockOutput attention_block(const Matrix& layer_input, std::size_t layer_index,
                                   const ModelConfig& cfg, const WeightSet& weights) {
  if (layer_input.cols() != cfg.hidden_dim())
    fail(ErrorCode::ConfigError, "layer input width " + std::to_string(layer_input.cols()) +
                                     " does not match hidden_dim " + std::to_string(cfg.hidden_dim()));
  if (layer_index >= weights.layers.size())
    fail(ErrorCode::ConfigError, "layer index " + std::to_string(layer_index) + " out of range");
  const LayerWeights& lw = weights.layers[layer_index];

  BlockOutput out;
  Matrix a;
  if (cfg.norm_placement() == NormPlacement::Post) {
    a = causal_attention(layer_input, lw, cfg, out.attention);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += layer_input.data()[i];
    a = layer_norm(a, lw.norm1_gamma, lw.norm1_beta);
    Matrix z = feed_forward(a, lw);
    for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] += a.data()[i];
    out.output = layer_norm(z, lw.norm2_gamma, lw.norm2_beta);
  } else {
    a = causal_attention(layer_norm(layer_input, lw.norm1_gamma, lw.norm1_beta), lw, cfg, out.attention);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += layer_input.data()[i];
    Matrix z = feed_forward(layer_norm(a, lw.norm2_gamma, lw.norm2_beta), lw);
    for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] += a.data()[i];
    out.output = std::move(z);
  }

  for (std::size_t r = 0; r < out.output.rows(); ++r)
    if (!detail::all_finite(out.output.row(r)))
      fail(ErrorCode::NumericalError,
           "non-finite activation at layer " + std::to_string(layer_index) + ", position " + std::to_string(r));
  return out;
}

inline void check_tokens(std::span<const TokenId> tokens, const ModelConfig& cfg) {
  if (tokens.empty()) fail(ErrorCode::EmptyInput, "token sequence is empty");
  if (tokens.size() > cfg.max_context())
    fail(ErrorCode::ContextOverflow, "sequence length " + std::to_string(tokens.size()) +
                                         " exceeds max_context " + std::to_string(cfg.max_context()));
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] >= cfg.vocab_size())
      fail(ErrorCode::UnknownToken, "token id " + std::to_string(tokens[i]) + " at position " +
                                        std::to_string(i) + " is outside the vocabulary");
}

// Token embedding plus absolute position terms (zero for rotary/none).
inline Matrix embed(std::span<const TokenId> tokens, const ModelConfig& cfg, const WeightSet& w) {
  Matrix z(tokens.size(), cfg.hidden_dim());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    auto dst = z.row(t);
    auto src = w.token_embedding.row(tokens[t]);
    std::copy(src.begin(), src.end(), dst.begin());
    if (cfg.positional_scheme() == PositionalScheme::LearnedAbsolute) {
      auto pos = w.position_embedding.row(t);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += pos[c];
    }
  }
  return z;
}

inline ForwardResult forward(std::span<const TokenId> tokens, const ModelConfig& cfg,
                             const WeightSet& weights, CaptureFlags capture = {}) {
  check_tokens(tokens, cfg);

  ForwardResult result;
  Matrix z = embed(tokens, cfg, weights);
  if (capture.hidden_states) {
    result.hidden_states.emplace();
    result.hidden_states->reserve(cfg.num_layers() + 1);
    result.hidden_states->push_back(z);
  }
  if (capture.attentions) result.attentions.emplace();

  for (std::size_t l = 0; l < cfg.num_layers(); ++l) {
    BlockOutput block = attention_block(z, l, cfg, weights);
    z = std::move(block.output);
    if (capture.hidden_states) result.hidden_states->push_back(z);
    if (capture.attentions) result.attentions->push_back(std::move(block.attention));
  }

  auto last = z.row(z.rows() - 1);
  if (cfg.norm_placement() == NormPlacement::Pre) {
    std::vector<double> normed(last.size());
    layer_norm_row(last, weights.final_gamma, weights.final_beta, normed);
    result.logits = vecmat(normed, weights.output_head);
  } else {
    result.logits = vecmat(last, weights.output_head);
  }
  return result;
}

inline std::size_t argmax(std::span<const double> xs) {
  return static_cast<std::size_t>(std::distance(xs.begin(), std::max_element(xs.begin(), xs.end())));
}

// Generated tokens only (the prompt is not echoed). The stop token, when hit,
// is included as the last element.
inline std::vector<TokenId> greedy_decode(std::span<const TokenId> prompt, std::size_t max_new,
                                          const std::unordered_set<TokenId>& stop_ids,
                                          const ModelConfig& cfg, const WeightSet& weights) {
  if (prompt.empty()) fail(ErrorCode::EmptyInput, "prompt is empty");
  if (max_new < 1) fail(ErrorCode::PreconditionError, "max_new must be >= 1");

  std::vector<TokenId> seq(prompt.begin(), prompt.end());
  std::vector<TokenId> generated;
  for (std::size_t step = 0; step < max_new; ++step) {
    if (seq.size() + 1 > cfg.max_context())
      fail(ErrorCode::ContextOverflow, "generation would exceed max_context " + std::to_string(cfg.max_context()));
    const ForwardResult r = forward(seq, cfg, weights);
    const auto next = static_cast<TokenId>(argmax(r.logits));
    generated.push_back(next);
    seq.push_back(next);
    if (stop_ids.contains(next)) break;
  }
  return generated;
}

// Masked scores in a causal (T+M) x (T+M) attention map.
constexpr std::uint64_t count_masked_scores(std::uint64_t T, std::uint64_t M) noexcept {
  const std::uint64_t n = T + M;
  return n * (n - 1) / 2;
}

constexpr std::uint64_t count_total_scores(std::uint64_t T, std::uint64_t M) noexcept {
  return (T + M) * (T + M);
}

}  // namespace ecs
