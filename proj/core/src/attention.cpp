#include "attnablate/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "attnablate/error.hpp"

namespace attnablate {
namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Softmax over row[0..n) in place; entries may be -inf (masked), never +inf/NaN.
void softmax_prefix(std::span<double> row) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : row) mx = std::max(mx, s);
  double sum = 0.0;
  for (double& s : row) {
    s = std::exp(s - mx);
    sum += s;
  }
  for (double& s : row) s /= sum;
}

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + " has shape " + dims(m) + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

void AttentionConfig::validate() const {
  if (num_heads < 1 || model_dim < 1 || head_dim < 1)
    throw ShapeError("attention config: all dimensions must be >= 1");
  if (num_heads * head_dim != model_dim) {
    throw ShapeError("attention config: num_heads (" + std::to_string(num_heads) +
                     ") * head_dim (" + std::to_string(head_dim) + ") != model_dim (" +
                     std::to_string(model_dim) + ")");
  }
}

void AttentionWeights::validate(const AttentionConfig& config) const {
  config.validate();
  if (heads.size() != config.num_heads) {
    throw ShapeError("attention weights carry " + std::to_string(heads.size()) +
                     " heads, config expects " + std::to_string(config.num_heads));
  }
  for (const auto& h : heads) {
    expect_shape(h.wq, config.model_dim, config.head_dim, "wq");
    expect_shape(h.wk, config.model_dim, config.head_dim, "wk");
    expect_shape(h.wv, config.model_dim, config.head_dim, "wv");
  }
  expect_shape(wo, config.model_dim, config.model_dim, "wo");
}

RotaryEmbedding::RotaryEmbedding(std::size_t head_dim, std::size_t max_positions, double theta)
    : head_dim_(head_dim), max_positions_(max_positions) {
  if (head_dim == 0 || head_dim % 2 != 0)
    throw ShapeError("rotary embedding needs an even head_dim, got " + std::to_string(head_dim));
  const std::size_t pairs = head_dim / 2;
  cos_.resize(max_positions * pairs);
  sin_.resize(max_positions * pairs);
  for (std::size_t pos = 0; pos < max_positions; ++pos) {
    for (std::size_t i = 0; i < pairs; ++i) {
      const double freq = std::pow(theta, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
      const double angle = static_cast<double>(pos) * freq;
      cos_[pos * pairs + i] = std::cos(angle);
      sin_[pos * pairs + i] = std::sin(angle);
    }
  }
}

void RotaryEmbedding::apply(Matrix& m) const {
  if (m.cols() != head_dim_) throw ShapeError("rotary: head_dim mismatch");
  if (m.rows() > max_positions_) throw ShapeError("rotary: sequence longer than table");
  const std::size_t pairs = head_dim_ / 2;
  for (std::size_t t = 0; t < m.rows(); ++t) {
    auto row = m.row(t);
    for (std::size_t i = 0; i < pairs; ++i) {
      const double c = cos_[t * pairs + i];
      const double s = sin_[t * pairs + i];
      const double a = row[2 * i];
      const double b = row[2 * i + 1];
      row[2 * i] = a * c - b * s;
      row[2 * i + 1] = a * s + b * c;
    }
  }
}

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw InputError("softmax: empty input");
  for (double x : v)
    if (!std::isfinite(x)) throw InputError("softmax: non-finite input");
  std::vector<double> out(v.begin(), v.end());
  softmax_prefix(out);
  return out;
}

Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v, bool causal_mask) {
  if (q.cols() != k.cols()) {
    throw ShapeError("attention: q.cols (" + std::to_string(q.cols()) + ") != k.cols (" +
                     std::to_string(k.cols()) + ")");
  }
  if (k.rows() != v.rows()) {
    throw ShapeError("attention: k.rows (" + std::to_string(k.rows()) + ") != v.rows (" +
                     std::to_string(v.rows()) + ")");
  }
  if (causal_mask && q.rows() != k.rows()) {
    throw ShapeError("attention: causal mask needs q.rows (" + std::to_string(q.rows()) +
                     ") == k.rows (" + std::to_string(k.rows()) + ")");
  }
  if (k.rows() == 0) throw ShapeError("attention: k.rows must be >= 1");

  const double scale = 1.0 / std::sqrt(static_cast<double>(k.cols()));
  Matrix out(q.rows(), v.cols());
  std::vector<double> scores(k.rows());
  for (std::size_t t = 0; t < q.rows(); ++t) {
    const std::size_t visible = causal_mask ? t + 1 : k.rows();
    for (std::size_t j = 0; j < k.rows(); ++j) {
      if (j >= visible) {
        scores[j] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double dot = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) dot += q(t, c) * k(j, c);
      scores[j] = dot * scale;
    }
    softmax_prefix(scores);
    auto dst = out.row(t);
    for (std::size_t j = 0; j < visible; ++j) {
      const double w = scores[j];
      for (std::size_t c = 0; c < v.cols(); ++c) dst[c] += w * v(j, c);
    }
  }
  return out;
}

Matrix multi_head_attention(const Matrix& x, const AttentionWeights& weights,
                            const AttentionConfig& config, bool disabled) {
  AttentionOptions options;
  options.disabled = disabled;
  return multi_head_attention(x, weights, config, options);
}

Matrix multi_head_attention(const Matrix& x, const AttentionWeights& weights,
                            const AttentionConfig& config, const AttentionOptions& options) {
  weights.validate(config);
  if (x.cols() != config.model_dim) {
    throw ShapeError("attention input has " + std::to_string(x.cols()) +
                     " columns, model_dim is " + std::to_string(config.model_dim));
  }
  for (std::size_t h : options.zeroed_heads) {
    if (h >= config.num_heads) throw ShapeError("zeroed head index " + std::to_string(h) + " out of range");
  }
  if (options.disabled) return Matrix(x.rows(), config.model_dim);

  Matrix concat(x.rows(), config.model_dim);
  for (std::size_t h = 0; h < config.num_heads; ++h) {
    if (std::find(options.zeroed_heads.begin(), options.zeroed_heads.end(), h) !=
        options.zeroed_heads.end()) {
      continue;
    }
    const auto& hw = weights.heads[h];
    Matrix q = matmul(x, hw.wq);
    Matrix k = matmul(x, hw.wk);
    Matrix v = matmul(x, hw.wv);
    if (options.rotary != nullptr) {
      options.rotary->apply(q);
      options.rotary->apply(k);
    }
    Matrix head = scaled_dot_attention(q, k, v, options.causal);
    for (std::size_t t = 0; t < x.rows(); ++t)
      for (std::size_t c = 0; c < config.head_dim; ++c)
        concat(t, h * config.head_dim + c) = head(t, c);
  }
  return matmul(concat, weights.wo);
}

}  // namespace attnablate
