#pragma once

// Reference implementations used only by tests. They share no code with the
// library's numeric paths.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <random>
#include <vector>

#include "attnablate/matrix.hpp"
#include "attnablate/model.hpp"

namespace oracle {

using Wide = boost::multiprecision::cpp_bin_float_50;

inline std::vector<Wide> softmax(const std::vector<double>& v) {
  std::vector<Wide> e;
  Wide sum = 0;
  for (double x : v) {
    e.push_back(boost::multiprecision::exp(Wide(x)));
    sum += e.back();
  }
  for (auto& x : e) x /= sum;
  return e;
}

// softmax(q k^T / sqrt(d_k)) v element by element in 50-digit arithmetic.
inline attnablate::Matrix attention(const attnablate::Matrix& q, const attnablate::Matrix& k,
                                    const attnablate::Matrix& v, bool causal) {
  attnablate::Matrix out(q.rows(), v.cols());
  const Wide scale = 1 / boost::multiprecision::sqrt(Wide(k.cols()));
  for (std::size_t t = 0; t < q.rows(); ++t) {
    const std::size_t n = causal ? t + 1 : k.rows();
    std::vector<Wide> w(n);
    Wide sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      Wide dot = 0;
      for (std::size_t c = 0; c < q.cols(); ++c) dot += Wide(q(t, c)) * Wide(k(j, c));
      w[j] = boost::multiprecision::exp(dot * scale);
      sum += w[j];
    }
    for (std::size_t c = 0; c < v.cols(); ++c) {
      Wide acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += w[j] / sum * Wide(v(j, c));
      out(t, c) = static_cast<double>(acc);
    }
  }
  return out;
}

inline attnablate::Matrix wide_matmul(const attnablate::Matrix& a, const attnablate::Matrix& b) {
  attnablate::Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      Wide acc = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += Wide(a(i, k)) * Wide(b(k, j));
      out(i, j) = static_cast<double>(acc);
    }
  return out;
}

// Headwise multi-head attention: each head computed separately, written into
// its column block, then projected by wo. Causal, no rotary encoding.
inline attnablate::Matrix multi_head(const attnablate::Matrix& x, const attnablate::AttentionWeights& w,
                                     std::size_t head_dim) {
  attnablate::Matrix concat(x.rows(), w.heads.size() * head_dim);
  for (std::size_t h = 0; h < w.heads.size(); ++h) {
    const auto q = wide_matmul(x, w.heads[h].wq);
    const auto k = wide_matmul(x, w.heads[h].wk);
    const auto v = wide_matmul(x, w.heads[h].wv);
    const auto head = attention(q, k, v, true);
    for (std::size_t t = 0; t < x.rows(); ++t)
      for (std::size_t c = 0; c < head_dim; ++c) concat(t, h * head_dim + c) = head(t, c);
  }
  return wide_matmul(concat, w.wo);
}

// Forward pass that evaluates only the normalization + MLP residual blocks,
// written with plain loops in the natural summation order.
inline attnablate::Matrix mlp_only_forward(const attnablate::Model& model, const attnablate::TokenSeq& tokens) {
  const auto& c = model.config();
  const auto& w = model.weights();
  const std::size_t d = c.model_dim;
  std::vector<std::vector<double>> x(tokens.size(), std::vector<double>(d));
  for (std::size_t t = 0; t < tokens.size(); ++t)
    for (std::size_t i = 0; i < d; ++i) x[t][i] = w.embed(tokens[t], i);

  auto norm = [&](const std::vector<double>& v, const attnablate::Matrix& g) {
    double ss = 0.0;
    for (double e : v) ss += e * e;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + attnablate::kRmsNormEps);
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = v[i] * inv * g(0, i);
    return out;
  };

  for (const auto& layer : w.layers) {
    for (auto& row : x) {
      const auto n = norm(row, layer.norm2);
      std::vector<double> hidden(c.mlp_hidden_dim);
      for (std::size_t j = 0; j < c.mlp_hidden_dim; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) acc += n[i] * layer.mlp_in(i, j);
        hidden[j] = 0.5 * acc * (1.0 + std::erf(acc / std::sqrt(2.0)));
      }
      std::vector<double> out(d);
      for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c.mlp_hidden_dim; ++j) acc += hidden[j] * layer.mlp_out(j, i);
        out[i] = acc;
      }
      for (std::size_t i = 0; i < d; ++i) row[i] += out[i];
    }
  }
  attnablate::Matrix logits(tokens.size(), c.vocab_size);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto n = norm(x[t], w.final_norm);
    for (std::size_t v = 0; v < c.vocab_size; ++v) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += n[i] * w.unembed(i, v);
      logits(t, v) = acc;
    }
  }
  return logits;
}

inline attnablate::Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                        double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  attnablate::Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

}  // namespace oracle
