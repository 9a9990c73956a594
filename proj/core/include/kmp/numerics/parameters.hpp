#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kmp/numerics/tensor.hpp"

namespace kmp {

// Named, ordered collection of trainable tensors. Names are unique; order is
// insertion order and is what checkpoints and optimizers iterate over.
class ParameterStore {
 public:
  Tensor add(std::string name, Tensor tensor);
  bool contains(std::string_view name) const;
  Tensor get(std::string_view name) const;

  const std::vector<Parameter>& all() const { return params_; }
  std::vector<Parameter> with_prefix(std::string_view prefix) const;
  std::size_t total_elements() const;
  void zero_grad();

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Deterministic per-parameter seed so that a parameter's initial value
// depends only on (seed, name) and not on which other parameters exist.
std::uint64_t parameter_seed(std::uint64_t seed, std::string_view name);

// N(0, gain / fan_in) init; gain 2 is He-normal.
Tensor scaled_normal(Shape shape, std::size_t fan_in, double gain, std::uint64_t seed);
inline Tensor he_normal(Shape shape, std::size_t fan_in, std::uint64_t seed) {
  return scaled_normal(std::move(shape), fan_in, 2.0, seed);
}

}  // namespace kmp
