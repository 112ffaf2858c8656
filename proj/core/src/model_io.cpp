#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "attnablate/error.hpp"
#include "attnablate/model.hpp"

namespace attnablate {
namespace {

using json = nlohmann::json;

constexpr int kFormatVersion = 1;

struct Entry {
  std::string name;
  std::vector<std::size_t> shape;
};

std::vector<Entry> manifest_for(const ModelConfig& c) {
  std::vector<Entry> m;
  m.push_back({"embed", {c.vocab_size, c.model_dim}});
  for (std::size_t l = 1; l <= c.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l);
    for (const char* proj : {"wq", "wk", "wv", "wo"})
      m.push_back({p + ".attn." + proj, {c.model_dim, c.model_dim}});
    m.push_back({p + ".norm1", {c.model_dim}});
    m.push_back({p + ".norm2", {c.model_dim}});
    m.push_back({p + ".mlp.win", {c.model_dim, c.mlp_hidden_dim}});
    m.push_back({p + ".mlp.wout", {c.mlp_hidden_dim, c.model_dim}});
  }
  m.push_back({"final_norm", {c.model_dim}});
  m.push_back({"unembed", {c.model_dim, c.vocab_size}});
  return m;
}

std::size_t numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void put_f32(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float get_f32(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

// Packs per-head projections side by side: head h owns columns [h*hd, (h+1)*hd).
Matrix pack_heads(const std::vector<HeadWeights>& heads, Matrix HeadWeights::*which,
                  std::size_t model_dim, std::size_t head_dim) {
  Matrix m(model_dim, model_dim);
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const Matrix& src = heads[h].*which;
    for (std::size_t r = 0; r < model_dim; ++r)
      for (std::size_t c = 0; c < head_dim; ++c) m(r, h * head_dim + c) = src(r, c);
  }
  return m;
}

std::vector<const Matrix*> tensors_in_order(const Model& model, std::vector<Matrix>& scratch) {
  const auto& c = model.config();
  const auto& w = model.weights();
  scratch.clear();
  scratch.reserve(3 * c.num_layers);
  std::vector<const Matrix*> out;
  out.push_back(&w.embed);
  for (const auto& layer : w.layers) {
    scratch.push_back(pack_heads(layer.attn.heads, &HeadWeights::wq, c.model_dim, c.head_dim()));
    out.push_back(&scratch.back());
    scratch.push_back(pack_heads(layer.attn.heads, &HeadWeights::wk, c.model_dim, c.head_dim()));
    out.push_back(&scratch.back());
    scratch.push_back(pack_heads(layer.attn.heads, &HeadWeights::wv, c.model_dim, c.head_dim()));
    out.push_back(&scratch.back());
    out.push_back(&layer.attn.wo);
    out.push_back(&layer.norm1);
    out.push_back(&layer.norm2);
    out.push_back(&layer.mlp_in);
    out.push_back(&layer.mlp_out);
  }
  out.push_back(&w.final_norm);
  out.push_back(&w.unembed);
  return out;
}

std::size_t get_count(const json& header, const char* key) {
  if (!header.contains(key) || !header[key].is_number_unsigned())
    throw LoadError(std::string("weights header: missing or invalid '") + key + "'");
  return header[key].get<std::size_t>();
}

WeightsHeader parse_header(const std::string& line) {
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw LoadError(std::string("weights header is not valid JSON: ") + e.what());
  }
  if (!header.is_object()) throw LoadError("weights header must be a JSON object");
  WeightsHeader h;
  if (!header.contains("format_version") || !header["format_version"].is_number_integer())
    throw LoadError("weights header: missing format_version");
  h.format_version = header["format_version"].get<int>();
  if (h.format_version != kFormatVersion)
    throw LoadError("unsupported weights format_version " + std::to_string(h.format_version));
  h.config.num_layers = get_count(header, "num_layers");
  h.config.num_heads = get_count(header, "num_heads");
  h.config.model_dim = get_count(header, "model_dim");
  h.config.mlp_hidden_dim = get_count(header, "mlp_hidden_dim");
  h.config.vocab_size = get_count(header, "vocab_size");
  h.config.max_seq_len = get_count(header, "max_seq_len");
  if (!header.contains("tensors") || !header["tensors"].is_array())
    throw LoadError("weights header: missing tensor manifest");
  for (const auto& t : header["tensors"]) {
    WeightsHeader::Tensor entry;
    try {
      entry.name = t.at("name").get<std::string>();
      entry.shape = t.at("shape").get<std::vector<std::size_t>>();
    } catch (const json::exception&) {
      throw LoadError("weights header: malformed manifest entry " + t.dump());
    }
    h.tensors.push_back(std::move(entry));
  }
  return h;
}

}  // namespace

std::string model_to_bytes(const Model& model) {
  const auto& c = model.config();
  json header;
  header["format_version"] = kFormatVersion;
  header["num_layers"] = c.num_layers;
  header["num_heads"] = c.num_heads;
  header["model_dim"] = c.model_dim;
  header["mlp_hidden_dim"] = c.mlp_hidden_dim;
  header["vocab_size"] = c.vocab_size;
  header["max_seq_len"] = c.max_seq_len;
  header["tensors"] = json::array();
  for (const auto& e : manifest_for(c)) header["tensors"].push_back({{"name", e.name}, {"shape", e.shape}});

  std::string out = header.dump();
  out.push_back('\n');
  std::vector<Matrix> scratch;
  for (const Matrix* m : tensors_in_order(model, scratch))
    for (double v : m->data()) put_f32(out, v);
  return out;
}

Model model_from_bytes(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw LoadError("weights file has no header line");
  const WeightsHeader header = parse_header(bytes.substr(0, nl));
  try {
    header.config.validate();
  } catch (const ShapeError& e) {
    throw LoadError(std::string("weights header: ") + e.what());
  }
  const auto& c = header.config;

  const auto expected = manifest_for(c);
  if (header.tensors.size() != expected.size()) {
    throw LoadError("tensor manifest has " + std::to_string(header.tensors.size()) +
                    " entries, expected " + std::to_string(expected.size()));
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (header.tensors[i].name != expected[i].name)
      throw LoadError("manifest entry " + std::to_string(i) + " is '" + header.tensors[i].name +
                      "', expected '" + expected[i].name + "'");
    if (header.tensors[i].shape != expected[i].shape)
      throw LoadError("tensor '" + expected[i].name + "' has a shape inconsistent with the config");
    total += numel(expected[i].shape);
  }
  const std::size_t blob = bytes.size() - nl - 1;
  if (blob != total * 4) {
    throw LoadError("blob length mismatch: expected " + std::to_string(total * 4) + " bytes, found " +
                    std::to_string(blob));
  }

  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + nl + 1;
  auto read_tensor = [&](const Entry& e) {
    const std::size_t rows = e.shape.size() == 1 ? 1 : e.shape[0];
    const std::size_t cols = e.shape.back();
    std::vector<double> data(rows * cols);
    for (double& v : data) {
      const float f = get_f32(p);
      p += 4;
      if (!std::isfinite(f)) throw LoadError("non-finite value in tensor '" + e.name + "'");
      v = static_cast<double>(f);
    }
    return Matrix(rows, cols, std::move(data));
  };

  std::size_t idx = 0;
  ModelWeights w;
  w.embed = read_tensor(expected[idx++]);
  const std::size_t hd = c.head_dim();
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    LayerWeights layer;
    const Matrix wq = read_tensor(expected[idx++]);
    const Matrix wk = read_tensor(expected[idx++]);
    const Matrix wv = read_tensor(expected[idx++]);
    for (std::size_t h = 0; h < c.num_heads; ++h)
      layer.attn.heads.push_back({wq.col_slice(h * hd, hd), wk.col_slice(h * hd, hd), wv.col_slice(h * hd, hd)});
    layer.attn.wo = read_tensor(expected[idx++]);
    layer.norm1 = read_tensor(expected[idx++]);
    layer.norm2 = read_tensor(expected[idx++]);
    layer.mlp_in = read_tensor(expected[idx++]);
    layer.mlp_out = read_tensor(expected[idx++]);
    w.layers.push_back(std::move(layer));
  }
  w.final_norm = read_tensor(expected[idx++]);
  w.unembed = read_tensor(expected[idx++]);
  return Model(c, std::move(w));
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing file: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_bytes(bytes);
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write weights file: " + path.string());
  const std::string bytes = model_to_bytes(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to weights file: " + path.string());
}

WeightsHeader read_weights_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw LoadError("weights file has no header line");
  return parse_header(line);
}

}  // namespace attnablate
