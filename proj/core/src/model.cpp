#include "attnablate/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "attnablate/error.hpp"

namespace attnablate {
namespace {

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError("tensor '" + name + "' has shape " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  if (!m.all_finite()) throw ShapeError("non-finite value in tensor '" + name + "'");
}

Matrix embed_tokens(const Matrix& embed, const TokenSeq& tokens) {
  Matrix x(tokens.size(), embed.cols());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    auto src = embed.row(tokens[t]);
    std::copy(src.begin(), src.end(), x.row(t).begin());
  }
  return x;
}

// Shared layer loop. `ablated(layer)` decides per 1-based layer whether the
// attention sublayer is zeroed; `trace` may be null.
template <typename Gate>
Matrix run_layers(const Model& model, const TokenSeq& tokens, Gate ablated,
                  std::vector<LayerTrace>* trace) {
  const auto& cfg = model.config();
  const auto& w = model.weights();
  const AttentionConfig attn_cfg = cfg.attention();

  Matrix x = embed_tokens(w.embed, tokens);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const LayerWeights& layer = w.layers[l];
    const bool off = ablated(l + 1);

    AttentionOptions opts;
    opts.causal = true;
    opts.disabled = off;
    opts.rotary = &model.rotary();
    Matrix attn = multi_head_attention(rms_norm(x, layer.norm1), layer.attn, attn_cfg, opts);

    Matrix a = x;
    if (!off) add_inplace(a, attn);
    Matrix y = a;
    add_inplace(y, mlp_block(rms_norm(a, layer.norm2), layer));

    if (trace != nullptr) trace->push_back({x, std::move(attn), a, y});
    x = std::move(y);
  }
  return matmul(rms_norm(x, w.final_norm), w.unembed);
}

// Uniform in [-scale, scale], rounded to float32. Uses raw generator bits so
// the stream is identical on every standard library.
double uniform_f32(std::mt19937_64& rng, double scale) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return static_cast<double>(static_cast<float>((2.0 * u - 1.0) * scale));
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale,
                     double offset = 0.0) {
  Matrix m(rows, cols);
  for (double& v : m.data())
    v = static_cast<double>(static_cast<float>(offset + uniform_f32(rng, scale)));
  return m;
}

}  // namespace

void ModelConfig::validate() const {
  if (num_layers < 1 || num_heads < 1 || model_dim < 1 || mlp_hidden_dim < 1 || vocab_size < 1 ||
      max_seq_len < 1) {
    throw ShapeError("model config: all counts must be >= 1");
  }
  if (model_dim % num_heads != 0) {
    throw ShapeError("model config: model_dim (" + std::to_string(model_dim) +
                     ") not divisible by num_heads (" + std::to_string(num_heads) + ")");
  }
  if (head_dim() % 2 != 0) {
    throw ShapeError("model config: head_dim (" + std::to_string(head_dim()) +
                     ") must be even for rotary encoding");
  }
}

Model::Model(ModelConfig config, ModelWeights weights)
    : config_((config.validate(), config)),
      weights_(std::move(weights)),
      rotary_(config_.head_dim(), config_.max_seq_len, kRopeTheta) {
  const auto& c = config_;
  expect_shape(weights_.embed, c.vocab_size, c.model_dim, "embed");
  if (weights_.layers.size() != c.num_layers) {
    throw ShapeError("model has " + std::to_string(weights_.layers.size()) + " layers, config says " +
                     std::to_string(c.num_layers));
  }
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l + 1);
    const auto& layer = weights_.layers[l];
    if (layer.attn.heads.size() != c.num_heads)
      throw ShapeError(p + ".attn carries " + std::to_string(layer.attn.heads.size()) + " heads");
    for (std::size_t h = 0; h < c.num_heads; ++h) {
      expect_shape(layer.attn.heads[h].wq, c.model_dim, c.head_dim(), p + ".attn.wq");
      expect_shape(layer.attn.heads[h].wk, c.model_dim, c.head_dim(), p + ".attn.wk");
      expect_shape(layer.attn.heads[h].wv, c.model_dim, c.head_dim(), p + ".attn.wv");
    }
    expect_shape(layer.attn.wo, c.model_dim, c.model_dim, p + ".attn.wo");
    expect_shape(layer.norm1, 1, c.model_dim, p + ".norm1");
    expect_shape(layer.norm2, 1, c.model_dim, p + ".norm2");
    expect_shape(layer.mlp_in, c.model_dim, c.mlp_hidden_dim, p + ".mlp.win");
    expect_shape(layer.mlp_out, c.mlp_hidden_dim, c.model_dim, p + ".mlp.wout");
  }
  expect_shape(weights_.final_norm, 1, c.model_dim, "final_norm");
  expect_shape(weights_.unembed, c.model_dim, c.vocab_size, "unembed");
}

void Model::check_tokens(const TokenSeq& tokens) const {
  if (tokens.empty()) throw InputError("token sequence is empty");
  if (tokens.size() > config_.max_seq_len) {
    throw InputError("sequence length " + std::to_string(tokens.size()) + " exceeds max_seq_len " +
                     std::to_string(config_.max_seq_len));
  }
  for (TokenId t : tokens) {
    if (t >= config_.vocab_size) {
      throw InputError("token id " + std::to_string(t) + " >= vocab_size " +
                       std::to_string(config_.vocab_size));
    }
  }
}

Matrix Model::forward(const TokenSeq& tokens) const {
  check_tokens(tokens);
  return run_layers(*this, tokens, [](std::size_t) { return false; }, nullptr);
}

ForwardResult forward(const Model& model, const TokenSeq& tokens, const AblationSpec& ablation,
                      bool with_trace) {
  model.check_tokens(tokens);
  ablation.check_depth(model.config().num_layers);
  ForwardResult result;
  result.logits = run_layers(
      model, tokens, [&](std::size_t layer) { return ablation.contains(layer); },
      with_trace ? &result.trace : nullptr);
  return result;
}

TokenId argmax_row(const Matrix& logits, std::size_t r) {
  auto row = logits.row(r);
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return static_cast<TokenId>(best);
}

TokenSeq greedy_decode(const Model& model, const TokenSeq& prompt, std::size_t max_new_tokens,
                       const AblationSpec& ablation, TokenId stop_token) {
  model.check_tokens(prompt);
  ablation.check_depth(model.config().num_layers);
  TokenSeq seq = prompt;
  for (std::size_t step = 0; step < max_new_tokens; ++step) {
    if (seq.size() >= model.config().max_seq_len) break;
    const ForwardResult fr = forward(model, seq, ablation);
    const TokenId next = argmax_row(fr.logits, fr.logits.rows() - 1);
    if (next == stop_token) break;
    seq.push_back(next);
  }
  return seq;
}

Matrix rms_norm(const Matrix& x, const Matrix& gain) {
  if (gain.rows() != 1 || gain.cols() != x.cols()) throw ShapeError("rms_norm: gain shape mismatch");
  Matrix out(x.rows(), x.cols());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    double ss = 0.0;
    for (double v : x.row(t)) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.cols()) + kRmsNormEps);
    for (std::size_t c = 0; c < x.cols(); ++c) out(t, c) = x(t, c) * inv * gain(0, c);
  }
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

Matrix mlp_block(const Matrix& x, const LayerWeights& layer) {
  Matrix hidden = matmul(x, layer.mlp_in);
  for (double& v : hidden.data()) v = gelu(v);
  return matmul(hidden, layer.mlp_out);
}

Model random_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const double d = static_cast<double>(config.model_dim);
  const double proj = 1.0 / std::sqrt(d);
  const double down = 1.0 / std::sqrt(static_cast<double>(config.mlp_hidden_dim));

  ModelWeights w;
  w.embed = random_matrix(rng, config.vocab_size, config.model_dim, 1.0);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    LayerWeights layer;
    for (std::size_t h = 0; h < config.num_heads; ++h) {
      HeadWeights hw;
      hw.wq = random_matrix(rng, config.model_dim, config.head_dim(), proj);
      hw.wk = random_matrix(rng, config.model_dim, config.head_dim(), proj);
      hw.wv = random_matrix(rng, config.model_dim, config.head_dim(), proj);
      layer.attn.heads.push_back(std::move(hw));
    }
    layer.attn.wo = random_matrix(rng, config.model_dim, config.model_dim, proj);
    layer.norm1 = random_matrix(rng, 1, config.model_dim, 0.1, 1.0);
    layer.norm2 = random_matrix(rng, 1, config.model_dim, 0.1, 1.0);
    layer.mlp_in = random_matrix(rng, config.model_dim, config.mlp_hidden_dim, proj);
    layer.mlp_out = random_matrix(rng, config.mlp_hidden_dim, config.model_dim, down);
    w.layers.push_back(std::move(layer));
  }
  w.final_norm = random_matrix(rng, 1, config.model_dim, 0.1, 1.0);
  w.unembed = random_matrix(rng, config.model_dim, config.vocab_size, proj);
  return Model(config, std::move(w));
}

}  // namespace attnablate
