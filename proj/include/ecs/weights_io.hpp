#pragma once

// ECSW weight container, all integers and doubles little-endian:
//
//   "ECSW"                 4 bytes magic
//   u32 version            currently 1
//   u32 num_layers, hidden_dim, num_heads, ffn_dim, vocab_size, max_context
//   u8  norm_placement     0 = pre, 1 = post
//   u8  positional_scheme  0 = rotary, 1 = learned-absolute, 2 = none
//   u32 tensor_count
//   tensor_count x { u32 rows, u32 cols, rows*cols f64 row-major }
//
// Tensor order: token_embedding, [position_embedding], then per layer
// norm1_gamma, norm1_beta, wq, wk, wv, wo, norm2_gamma, norm2_beta, ff_w1,
// ff_b1, ff_w2, ff_b2, and finally final_gamma, final_beta, output_head.
// Vectors are stored as 1 x n tensors.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ecs/error.hpp"
#include "ecs/model.hpp"

namespace ecs {

inline constexpr char kWeightMagic[4] = {'E', 'C', 'S', 'W'};
inline constexpr std::uint32_t kWeightVersion = 1;

struct Checkpoint {
  ModelConfig config;
  WeightSet weights;
};

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }

  void tensor(std::size_t rows, std::size_t cols, std::span<const double> data) {
    u32(static_cast<std::uint32_t>(rows));
    u32(static_cast<std::uint32_t>(cols));
    for (double v : data) f64(v);
  }
  void tensor(const Matrix& m) { tensor(m.rows(), m.cols(), m.data()); }
  void tensor(const std::vector<double>& v) { tensor(1, v.size(), v); }

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string bytes, std::string source) : buf_(std::move(bytes)), source_(std::move(source)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

  std::string raw(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  Matrix matrix(const std::string& name) {
    const std::uint32_t rows = u32(), cols = u32();
    if ((buf_.size() - pos_) / 8 < static_cast<std::size_t>(rows) * cols)
      fail(ErrorCode::WeightError, source_ + ": truncated tensor " + name);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = f64();
    return m;
  }

  std::vector<double> vector(const std::string& name) {
    Matrix m = matrix(name);
    if (m.rows() != 1) fail(ErrorCode::WeightError, source_ + ": " + name + " must be stored as a 1 x n tensor");
    return {m.data().begin(), m.data().end()};
  }

  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) fail(ErrorCode::WeightError, source_ + ": truncated weight file");
  }

  std::string buf_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline std::uint32_t tensor_count(const ModelConfig& cfg) {
  const std::uint32_t pos = cfg.positional_scheme() == PositionalScheme::LearnedAbsolute ? 1 : 0;
  return 1 + pos + 12 * static_cast<std::uint32_t>(cfg.num_layers()) + 3;
}

}  // namespace detail

inline std::string serialize_checkpoint(const ModelConfig& cfg, const WeightSet& w) {
  validate_weights(cfg, w);
  detail::ByteWriter out;
  out.raw(kWeightMagic, 4);
  out.u32(kWeightVersion);
  const auto& p = cfg.params();
  for (std::uint32_t v : {p.num_layers, p.hidden_dim, p.num_heads, p.ffn_dim, p.vocab_size, p.max_context})
    out.u32(v);
  out.u8(static_cast<std::uint8_t>(p.norm_placement));
  out.u8(static_cast<std::uint8_t>(p.positional_scheme));
  out.u32(detail::tensor_count(cfg));

  out.tensor(w.token_embedding);
  if (cfg.positional_scheme() == PositionalScheme::LearnedAbsolute) out.tensor(w.position_embedding);
  for (const auto& lw : w.layers) {
    out.tensor(lw.norm1_gamma);
    out.tensor(lw.norm1_beta);
    out.tensor(lw.wq);
    out.tensor(lw.wk);
    out.tensor(lw.wv);
    out.tensor(lw.wo);
    out.tensor(lw.norm2_gamma);
    out.tensor(lw.norm2_beta);
    out.tensor(lw.ff_w1);
    out.tensor(lw.ff_b1);
    out.tensor(lw.ff_w2);
    out.tensor(lw.ff_b2);
  }
  out.tensor(w.final_gamma);
  out.tensor(w.final_beta);
  out.tensor(w.output_head);
  return out.bytes();
}

// `source` names the origin in error messages.
inline Checkpoint deserialize_checkpoint(std::string bytes, const std::string& source = "<memory>") {
  detail::ByteReader in(std::move(bytes), source);
  if (in.raw(4) != std::string(kWeightMagic, 4)) fail(ErrorCode::WeightError, source + ": bad magic, not an ECSW file");
  const std::uint32_t version = in.u32();
  if (version != kWeightVersion)
    fail(ErrorCode::WeightError, source + ": unsupported version " + std::to_string(version));

  ModelParams p;
  p.num_layers = in.u32();
  p.hidden_dim = in.u32();
  p.num_heads = in.u32();
  p.ffn_dim = in.u32();
  p.vocab_size = in.u32();
  p.max_context = in.u32();
  const std::uint8_t norm = in.u8(), pos = in.u8();
  if (norm > 1) fail(ErrorCode::WeightError, source + ": invalid norm placement tag");
  if (pos > 2) fail(ErrorCode::WeightError, source + ": invalid positional scheme tag");
  p.norm_placement = static_cast<NormPlacement>(norm);
  p.positional_scheme = static_cast<PositionalScheme>(pos);

  std::optional<ModelConfig> cfg;
  try {
    cfg.emplace(p);
  } catch (const Error& e) {
    fail(ErrorCode::WeightError, source + ": " + e.what());
  }
  const std::uint32_t count = in.u32();
  if (count != detail::tensor_count(*cfg))
    fail(ErrorCode::WeightError, source + ": tensor count " + std::to_string(count) + " does not match config");

  WeightSet w;
  w.token_embedding = in.matrix("token_embedding");
  if (cfg->positional_scheme() == PositionalScheme::LearnedAbsolute) w.position_embedding = in.matrix("position_embedding");
  for (std::size_t l = 0; l < cfg->num_layers(); ++l) {
    LayerWeights lw;
    lw.norm1_gamma = in.vector("norm1_gamma");
    lw.norm1_beta = in.vector("norm1_beta");
    lw.wq = in.matrix("wq");
    lw.wk = in.matrix("wk");
    lw.wv = in.matrix("wv");
    lw.wo = in.matrix("wo");
    lw.norm2_gamma = in.vector("norm2_gamma");
    lw.norm2_beta = in.vector("norm2_beta");
    lw.ff_w1 = in.matrix("ff_w1");
    lw.ff_b1 = in.vector("ff_b1");
    lw.ff_w2 = in.matrix("ff_w2");
    lw.ff_b2 = in.vector("ff_b2");
    w.layers.push_back(std::move(lw));
  }
  w.final_gamma = in.vector("final_gamma");
  w.final_beta = in.vector("final_beta");
  w.output_head = in.matrix("output_head");
  if (!in.at_end()) fail(ErrorCode::WeightError, source + ": trailing bytes after last tensor");

  try {
    validate_weights(*cfg, w);
  } catch (const Error& e) {
    fail(ErrorCode::WeightError, source + ": " + e.what());
  }
  return {std::move(*cfg), std::move(w)};
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const WeightSet& w) {
  const std::string bytes = serialize_checkpoint(cfg, w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::WeightError, path.string() + ": cannot open weight file");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(std::move(bytes), path.string());
}

}  // namespace ecs
