#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kmp {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;

  void accumulate(std::size_t i, double g) {
    ensure_grad();
    grad[i] += g;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Row-major float64 array with an optional gradient buffer. Copies share the
// underlying node, so a Tensor behaves like a handle. Values are treated as
// immutable once an op has produced them; only leaves (parameters, inputs)
// are written through mutable_data().
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  bool defined() const { return static_cast<bool>(node_); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Zero-filled view when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad() { node_->grad.clear(); }

  // Same values, no gradient tracking.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  detail::TensorNode* node() const { return node_.get(); }
  const std::shared_ptr<detail::TensorNode>& shared_node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// Ordered record of backward closures for one forward pass. The tape is
// thread-confined: ops record onto the tape installed by TapeScope on the
// calling thread, and nothing is recorded when no tape is active.
class Tape {
 public:
  using Backward = std::function<void()>;

  void record(Backward fn) { ops_.push_back(std::move(fn)); }
  // Seeds d(loss)/d(loss) = 1 and replays the record in reverse.
  void backward(const Tensor& loss);
  void clear() { ops_.clear(); }
  std::size_t size() const { return ops_.size(); }

 private:
  std::vector<Backward> ops_;
};

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// While enabled on the current thread, every op output is scanned and a
// NonFiniteError naming the op is thrown on the first NaN/Inf.
class FiniteCheckScope {
 public:
  explicit FiniteCheckScope(bool enabled = true);
  ~FiniteCheckScope();
  FiniteCheckScope(const FiniteCheckScope&) = delete;
  FiniteCheckScope& operator=(const FiniteCheckScope&) = delete;

 private:
  bool previous_;
};

bool finite_checks_enabled();

struct Parameter {
  std::string name;
  Tensor tensor;
};

}  // namespace kmp
