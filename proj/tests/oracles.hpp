#pragma once

// Test-only reference implementations. Nothing here calls into the ecs
// numeric code; only the plain weight/config containers are shared.

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "ecs/model.hpp"

namespace oracle {

using Real = long double;
using Vec = std::vector<Real>;
using Mat = std::vector<Vec>;  // [row][col]

inline Vec layer_norm(const Vec& x, const std::vector<double>& g, const std::vector<double>& b) {
  Real mean = 0;
  for (Real v : x) mean += v;
  mean /= static_cast<Real>(x.size());
  Real var = 0;
  for (Real v : x) var += (v - mean) * (v - mean);
  var /= static_cast<Real>(x.size());
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = (x[i] - mean) / std::sqrt(var + static_cast<Real>(ecs::kLayerNormEps)) * g[i] + b[i];
  return out;
}

// Row vector times W (W stored as in WeightSet: in x out).
inline Vec project(const Vec& x, const ecs::Matrix& w) {
  Vec out(w.cols(), 0);
  for (std::size_t j = 0; j < w.cols(); ++j)
    for (std::size_t k = 0; k < w.rows(); ++k) out[j] += x[k] * static_cast<Real>(w(k, j));
  return out;
}

// Rotary as multiplication of (even, odd) pairs by exp(i * pos * theta).
inline Vec rotate(const Vec& x, std::size_t pos, std::size_t heads, std::size_t head_dim) {
  Vec out = x;
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < head_dim / 2; ++i) {
      const Real theta = std::pow(static_cast<Real>(ecs::kRotaryBase),
                                  -static_cast<Real>(2 * i) / static_cast<Real>(head_dim));
      const std::complex<Real> r = std::polar(Real(1), static_cast<Real>(pos) * theta);
      const std::complex<Real> v(x[h * head_dim + 2 * i], x[h * head_dim + 2 * i + 1]);
      const auto w = v * r;
      out[h * head_dim + 2 * i] = w.real();
      out[h * head_dim + 2 * i + 1] = w.imag();
    }
  return out;
}

// Attention(Q_t, K_{1:t}, V_{1:t}) for every t, computed position by position.
inline Mat attention(const Mat& z, const ecs::LayerWeights& lw, const ecs::ModelConfig& cfg) {
  const std::size_t n = z.size(), heads = cfg.num_heads(), hd = cfg.head_dim();
  const bool rope = cfg.positional_scheme() == ecs::PositionalScheme::Rotary;
  Mat q(n), k(n), v(n);
  for (std::size_t t = 0; t < n; ++t) {
    q[t] = project(z[t], lw.wq);
    k[t] = project(z[t], lw.wk);
    v[t] = project(z[t], lw.wv);
    if (rope) {
      q[t] = rotate(q[t], t, heads, hd);
      k[t] = rotate(k[t], t, heads, hd);
    }
  }
  Mat out(n);
  for (std::size_t t = 0; t < n; ++t) {
    Vec concat(cfg.hidden_dim(), 0);
    for (std::size_t h = 0; h < heads; ++h) {
      Vec w(t + 1);
      Real total = 0;
      for (std::size_t s = 0; s <= t; ++s) {
        Real dot = 0;
        for (std::size_t c = 0; c < hd; ++c) dot += q[t][h * hd + c] * k[s][h * hd + c];
        w[s] = std::exp(dot / std::sqrt(static_cast<Real>(hd)));
        total += w[s];
      }
      for (std::size_t s = 0; s <= t; ++s)
        for (std::size_t c = 0; c < hd; ++c) concat[h * hd + c] += w[s] / total * v[s][h * hd + c];
    }
    out[t] = project(concat, lw.wo);
  }
  return out;
}

inline Vec feed_forward(const Vec& a, const ecs::LayerWeights& lw) {
  Vec h = project(a, lw.ff_w1);
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Real x = h[i] + lw.ff_b1[i];
    h[i] = 0.5L * x * (1 + std::tanh(std::sqrt(2 / static_cast<Real>(M_PI)) * (x + 0.044715L * x * x * x)));
  }
  Vec out = project(h, lw.ff_w2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += lw.ff_b2[i];
  return out;
}

inline Vec add(const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

// Post-norm:  a_t = LN(Attn + z_t),  z'_t = LN(FF(a_t) + a_t)
// Pre-norm:   a_t = z_t + Attn(LN(z)), z'_t = a_t + FF(LN(a_t))
inline Mat block(const Mat& z, std::size_t layer, const ecs::ModelConfig& cfg, const ecs::WeightSet& w) {
  const auto& lw = w.layers[layer];
  const std::size_t n = z.size();
  Mat out(n);
  if (cfg.norm_placement() == ecs::NormPlacement::Post) {
    const Mat att = attention(z, lw, cfg);
    for (std::size_t t = 0; t < n; ++t) {
      const Vec a = layer_norm(add(att[t], z[t]), lw.norm1_gamma, lw.norm1_beta);
      out[t] = layer_norm(add(feed_forward(a, lw), a), lw.norm2_gamma, lw.norm2_beta);
    }
  } else {
    Mat normed(n);
    for (std::size_t t = 0; t < n; ++t) normed[t] = layer_norm(z[t], lw.norm1_gamma, lw.norm1_beta);
    const Mat att = attention(normed, lw, cfg);
    for (std::size_t t = 0; t < n; ++t) {
      const Vec a = add(z[t], att[t]);
      out[t] = add(a, feed_forward(layer_norm(a, lw.norm2_gamma, lw.norm2_beta), lw));
    }
  }
  return out;
}

inline Mat from_matrix(const ecs::Matrix& m) {
  Mat out(m.rows(), Vec(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

// Strictly upper-triangular cells of an n x n grid, by explicit enumeration.
inline std::size_t brute_force_masked(std::size_t n) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j > i) ++count;
  return count;
}

inline std::size_t count_exact_zero_upper(const ecs::Matrix& m) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (m(i, j) == 0.0) ++count;
  return count;
}

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / scale;
}

}  // namespace oracle
