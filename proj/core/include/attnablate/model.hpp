#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "attnablate/ablation.hpp"
#include "attnablate/attention.hpp"
#include "attnablate/matrix.hpp"
#include "attnablate/tokenizer.hpp"

namespace attnablate {

inline constexpr double kRmsNormEps = 1e-5;
inline constexpr double kRopeTheta = 10000.0;

struct ModelConfig {
  std::size_t num_layers = 1;
  std::size_t num_heads = 1;
  std::size_t model_dim = 2;
  std::size_t mlp_hidden_dim = 1;
  std::size_t vocab_size = 1;
  std::size_t max_seq_len = 1;

  std::size_t head_dim() const noexcept { return num_heads == 0 ? 0 : model_dim / num_heads; }
  AttentionConfig attention() const { return {num_heads, model_dim, head_dim()}; }

  // All counts >= 1, model_dim divisible by num_heads, even head_dim (rotary pairs).
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerWeights {
  AttentionWeights attn;
  Matrix norm1;    // 1 x model_dim, gain before attention
  Matrix norm2;    // 1 x model_dim, gain before the MLP
  Matrix mlp_in;   // model_dim x mlp_hidden_dim
  Matrix mlp_out;  // mlp_hidden_dim x model_dim
};

struct ModelWeights {
  Matrix embed;  // vocab_size x model_dim
  std::vector<LayerWeights> layers;
  Matrix final_norm;  // 1 x model_dim
  Matrix unembed;     // model_dim x vocab_size
};

// Residual stream snapshots of one layer for one forward pass.
struct LayerTrace {
  Matrix input;           // x
  Matrix attn_out;        // Attn(Norm1(x)), zero when the layer is ablated
  Matrix post_attention;  // a = x + attn_out
  Matrix output;          // y = a + MLP(Norm2(a))
};

struct ForwardResult {
  Matrix logits;  // tokens x vocab_size
  std::vector<LayerTrace> trace;  // empty unless requested
};

// Decoder-only transformer: learned token embeddings, rotary positions on
// q/k, RMS normalization, pre-norm residual blocks, two-layer GELU MLP.
// Immutable once constructed; safe to share across threads.
class Model {
 public:
  Model(ModelConfig config, ModelWeights weights);

  const ModelConfig& config() const noexcept { return config_; }
  const ModelWeights& weights() const noexcept { return weights_; }
  const RotaryEmbedding& rotary() const noexcept { return rotary_; }

  // Forward pass without any intervention machinery.
  Matrix forward(const TokenSeq& tokens) const;

  // Throws InputError for an empty/overlong sequence or an id >= vocab_size.
  void check_tokens(const TokenSeq& tokens) const;

 private:
  ModelConfig config_;
  ModelWeights weights_;
  RotaryEmbedding rotary_;
};

// Forward pass with the attention sublayers of `ablation` zeroed. Layers in
// the spec contribute nothing to the residual stream: a = x exactly.
ForwardResult forward(const Model& model, const TokenSeq& tokens, const AblationSpec& ablation,
                      bool with_trace = false);

// Greedy (temperature 0) decoding. Each step appends the argmax of the last
// position's logits, ties going to the lowest id. Stops after
// max_new_tokens, when stop_token is produced (not appended), or when the
// sequence reaches max_seq_len. Returns prompt ++ generated tokens.
TokenSeq greedy_decode(const Model& model, const TokenSeq& prompt, std::size_t max_new_tokens,
                       const AblationSpec& ablation, TokenId stop_token);

// Index of the largest entry of row `r`; lowest index wins ties.
TokenId argmax_row(const Matrix& logits, std::size_t r);

// Building blocks shared with tests and benchmarks.
Matrix rms_norm(const Matrix& x, const Matrix& gain);
double gelu(double x);
Matrix mlp_block(const Matrix& x, const LayerWeights& layer);

// Weights file: one-line JSON header followed by little-endian float32
// blobs in manifest order.
Model load_model(const std::filesystem::path& path);
void save_model(const Model& model, const std::filesystem::path& path);
Model model_from_bytes(const std::string& bytes);
std::string model_to_bytes(const Model& model);

// Parses only the JSON header (config + manifest) of a weights file.
struct WeightsHeader {
  int format_version = 0;
  ModelConfig config;
  struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
  };
  std::vector<Tensor> tensors;
};
WeightsHeader read_weights_header(const std::filesystem::path& path);

// Seeded random weights, every value exactly representable as float32, so
// save/load round trips are lossless. Platform-independent for a given seed.
Model random_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace attnablate
