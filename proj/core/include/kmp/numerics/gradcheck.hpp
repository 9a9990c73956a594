#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kmp/numerics/tensor.hpp"

namespace kmp {

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every element; otherwise a deterministic sample of this many
  // elements per parameter.
  std::size_t max_elements_per_param = 0;
  std::uint64_t sample_seed = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_abs_analytic = 0.0;  // over the whole tensor, sampled or not
  double max_abs_numeric = 0.0;
  double max_abs_diff = 0.0;
  // max|a - n| over the checked elements divided by
  // max(max_abs_analytic, max_abs_numeric); falls back to the absolute
  // difference when both are below 1e-10.
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

// Compares tape gradients of the scalar function f against central finite
// differences (f(x+h) - f(x-h)) / 2h for every listed parameter. f must
// rebuild its graph on each call and must not use dropout. Throws
// NonFiniteError naming the first op that produced NaN/Inf.
GradCheckReport check_gradients(const std::function<Tensor()>& f, std::span<const Parameter> params,
                                const GradCheckOptions& options = {});

}  // namespace kmp
