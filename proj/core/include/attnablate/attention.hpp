#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "attnablate/matrix.hpp"

namespace attnablate {

struct AttentionConfig {
  std::size_t num_heads = 1;
  std::size_t model_dim = 1;
  std::size_t head_dim = 1;

  // Throws ShapeError unless num_heads * head_dim == model_dim and all counts >= 1.
  void validate() const;
};

// Projections of one head; each is model_dim x head_dim.
struct HeadWeights {
  Matrix wq;
  Matrix wk;
  Matrix wv;
};

// One attention sublayer: per-head projections plus the shared output
// projection wo (model_dim x model_dim) applied after concatenation.
struct AttentionWeights {
  std::vector<HeadWeights> heads;
  Matrix wo;

  void validate(const AttentionConfig& config) const;
};

// Rotary position encoding over consecutive coordinate pairs of a head.
class RotaryEmbedding {
 public:
  RotaryEmbedding(std::size_t head_dim, std::size_t max_positions, double theta = 10000.0);

  std::size_t head_dim() const noexcept { return head_dim_; }
  std::size_t max_positions() const noexcept { return max_positions_; }

  // Rotates row t of `m` (rows x head_dim) by the angle for position t.
  void apply(Matrix& m) const;

 private:
  std::size_t head_dim_;
  std::size_t max_positions_;
  std::vector<double> cos_;  // [position][pair]
  std::vector<double> sin_;
};

struct AttentionOptions {
  bool causal = true;
  // Zero the whole sublayer output (after wo).
  bool disabled = false;
  // Heads (0-based) whose output is zeroed before concatenation.
  std::vector<std::size_t> zeroed_heads;
  const RotaryEmbedding* rotary = nullptr;
};

// Numerically stable softmax. Throws InputError on empty or non-finite input.
std::vector<double> softmax(std::span<const double> v);

// softmax(q k^T / sqrt(d_k)) v, where d_k = k.cols(). With `causal_mask`,
// query t only attends to keys 0..t.
Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                            bool causal_mask);

// Concat(head_1..head_n) wo with causal masking. When `disabled` the result is
// the all-zero matrix of shape x.rows() x model_dim.
Matrix multi_head_attention(const Matrix& x, const AttentionWeights& weights,
                            const AttentionConfig& config, bool disabled);

Matrix multi_head_attention(const Matrix& x, const AttentionWeights& weights,
                            const AttentionConfig& config, const AttentionOptions& options);

}  // namespace attnablate
