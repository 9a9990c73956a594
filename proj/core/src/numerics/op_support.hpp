#pragma once

// Shared helpers for implementing differentiable ops. Internal to kmp_core.

#include <Eigen/Core>
#include <cmath>
#include <initializer_list>
#include <string>

#include "kmp/error.hpp"
#include "kmp/numerics/tensor.hpp"

namespace kmp::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

inline bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!active_tape()) return false;
  for (const Tensor* t : inputs) {
    if (t && t->requires_grad()) return true;
  }
  return false;
}

inline void check_finite(const char* op, const std::vector<double>& values) {
  if (!finite_checks_enabled()) return;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NonFiniteError(op, "element " + std::to_string(i));
    }
  }
}

inline Tensor make_output(const char* op, Shape shape, std::vector<double> data, bool track) {
  check_finite(op, data);
  return Tensor(std::move(shape), std::move(data), track);
}

// Gradient buffer of `t`, allocated on first use.
inline std::vector<double>& grad_of(const Tensor& t) {
  t.node()->ensure_grad();
  return t.node()->grad;
}

inline bool wants_grad(const Tensor& t) { return t.requires_grad(); }

}  // namespace kmp::detail
