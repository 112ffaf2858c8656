#pragma once

#include <cstddef>
#include <initializer_list>
#include <set>
#include <string>

namespace attnablate {

// Set of self-attention layers (1-based, layer 1 nearest the token input)
// whose sublayer output is forced to zero. The empty set is the original
// model, written z_o; {i} is written z_i.
class AblationSpec {
 public:
  AblationSpec() = default;
  AblationSpec(std::initializer_list<std::size_t> layers);

  static AblationSpec none() { return {}; }
  static AblationSpec single(std::size_t layer) { return AblationSpec{layer}; }

  // Throws InputError for index 0.
  AblationSpec& add(std::size_t layer);
  AblationSpec united(const AblationSpec& other) const;

  bool empty() const noexcept { return layers_.empty(); }
  std::size_t size() const noexcept { return layers_.size(); }
  bool contains(std::size_t layer) const noexcept { return layers_.count(layer) != 0; }
  const std::set<std::size_t>& layers() const noexcept { return layers_; }
  std::size_t max_layer() const noexcept { return layers_.empty() ? 0 : *layers_.rbegin(); }

  // Throws InputError("unknown layer ...") if any index exceeds num_layers.
  void check_depth(std::size_t num_layers) const;

  // "z_o", "z_13", or "z_{2,5}" for multi-layer specs.
  std::string label() const;

  friend bool operator==(const AblationSpec&, const AblationSpec&) = default;

 private:
  std::set<std::size_t> layers_;
};

}  // namespace attnablate
