#include "kmp/numerics/parameters.hpp"

#include <cmath>
#include <random>

#include "kmp/error.hpp"

namespace kmp {

Tensor ParameterStore::add(std::string name, Tensor tensor) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  tensor.set_requires_grad(true);
  index_.emplace(name, params_.size());
  params_.push_back({std::move(name), tensor});
  return tensor;
}

bool ParameterStore::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

Tensor ParameterStore::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw IndexError("no parameter named '" + std::string(name) + "'");
  return params_[it->second].tensor;
}

std::vector<Parameter> ParameterStore::with_prefix(std::string_view prefix) const {
  std::vector<Parameter> out;
  for (const auto& p : params_) {
    if (std::string_view(p.name).starts_with(prefix)) out.push_back(p);
  }
  return out;
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::uint64_t parameter_seed(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name, then one splitmix64 round mixed with the seed.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = h ^ (seed + 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor scaled_normal(Shape shape, std::size_t fan_in, double gain, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(gain / static_cast<double>(fan_in)));
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = dist(rng);
  return Tensor(std::move(shape), std::move(data), true);
}

}  // namespace kmp
