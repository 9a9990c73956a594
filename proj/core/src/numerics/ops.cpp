#include "kmp/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "op_support.hpp"

namespace kmp::ops {

using detail::ConstMatMap;
using detail::grad_of;
using detail::make_output;
using detail::MatMap;
using detail::should_record;

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " tensor, got shape " + shape_str(t.shape()));
  }
}

// Returns true when the output has a gradient worth propagating.
bool has_upstream(const Tensor& out) { return out.has_grad(); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dims differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  return linear(a, b, nullptr);
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor* bias) {
  if (x.rank() < 1 || weight.rank() != 2 || x.shape().back() != weight.dim(0)) {
    throw DimensionError("linear: input shape " + shape_str(x.shape()) +
                         " incompatible with weight shape " + shape_str(weight.shape()));
  }
  const std::size_t din = weight.dim(0);
  const std::size_t dout = weight.dim(1);
  if (bias && (bias->numel() != dout)) {
    throw DimensionError("linear: bias shape " + shape_str(bias->shape()) +
                         " does not match weight shape " + shape_str(weight.shape()));
  }
  const std::size_t rows = x.numel() / din;
  std::vector<double> out(rows * dout);
  ConstMatMap xm(x.data().data(), rows, din);
  ConstMatMap wm(weight.data().data(), din, dout);
  MatMap ym(out.data(), rows, dout);
  ym.noalias() = xm * wm;
  if (bias) {
    Eigen::Map<const Eigen::RowVectorXd> bv(bias->data().data(), dout);
    ym.rowwise() += bv;
  }
  Shape shape = x.shape();
  shape.back() = dout;
  const bool track = should_record({&x, &weight, bias});
  Tensor y = make_output("linear", std::move(shape), std::move(out), track);
  if (track) {
    Tensor b = bias ? *bias : Tensor();
    const bool has_bias = bias != nullptr;
    active_tape()->record([x, weight, b, has_bias, y, rows, din, dout] {
      if (!has_upstream(y)) return;
      ConstMatMap gy(y.node()->grad.data(), rows, dout);
      if (x.requires_grad()) {
        MatMap gx(grad_of(x).data(), rows, din);
        gx.noalias() += gy * ConstMatMap(weight.data().data(), din, dout).transpose();
      }
      if (weight.requires_grad()) {
        MatMap gw(grad_of(weight).data(), din, dout);
        gw.noalias() += ConstMatMap(x.data().data(), rows, din).transpose() * gy;
      }
      if (has_bias && b.requires_grad()) {
        // Plain loops: Eigen's vectorized reductions pick their summation
        // order from pointer alignment, which breaks bitwise reproducibility.
        auto& gb = grad_of(b);
        const double* g = y.node()->grad.data();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < dout; ++j) gb[j] += g[r * dout + j];
        }
      }
    });
  }
  return y;
}

namespace {

template <typename Fwd, typename BwdA, typename BwdB>
Tensor binary_elementwise(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, BwdA da,
                          BwdB db) {
  require_same_shape(op, a, b);
  const std::size_t n = a.numel();
  std::vector<double> out(n);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i], bd[i]);
  const bool track = should_record({&a, &b});
  Tensor y = make_output(op, a.shape(), std::move(out), track);
  if (track) {
    active_tape()->record([a, b, y, n, da, db] {
      if (!has_upstream(y)) return;
      const auto& gy = y.node()->grad;
      auto ad = a.data();
      auto bd = b.data();
      if (a.requires_grad()) {
        auto& ga = grad_of(a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * da(ad[i], bd[i]);
      }
      if (b.requires_grad()) {
        auto& gb = grad_of(b);
        for (std::size_t i = 0; i < n; ++i) gb[i] += gy[i] * db(ad[i], bd[i]);
      }
    });
  }
  return y;
}

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const char* op, const Tensor& x, Fwd fwd, Bwd dfdx) {
  const std::size_t n = x.numel();
  std::vector<double> out(n);
  auto xd = x.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(xd[i]);
  const bool track = should_record({&x});
  Tensor y = make_output(op, x.shape(), std::move(out), track);
  if (track) {
    active_tape()->record([x, y, n, dfdx] {
      if (!has_upstream(y)) return;
      const auto& gy = y.node()->grad;
      auto xd = x.data();
      auto& gx = grad_of(x);
      for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * dfdx(xd[i]);
    });
  }
  return y;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary_elementwise(
      "scale", x, [factor](double v) { return v * factor; }, [factor](double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary_elementwise(
      "add_scalar", x, [value](double v) { return v + value; }, [](double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary_elementwise(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& x) {
  return unary_elementwise(
      "softplus", x,
      [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  const bool track = should_record({&x});
  Tensor y = make_output("sum", Shape{}, {s}, track);
  if (track) {
    active_tape()->record([x, y] {
      if (!has_upstream(y)) return;
      const double g = y.node()->grad[0];
      for (auto& v : grad_of(x)) v += g;
    });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  const bool track = should_record({&x});
  Tensor y = make_output("reshape", std::move(shape),
                         std::vector<double>(x.data().begin(), x.data().end()), track);
  if (track) {
    active_tape()->record([x, y] {
      if (!has_upstream(y)) return;
      const auto& gy = y.node()->grad;
      auto& gx = grad_of(x);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    });
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() < 1 || x.shape().back() == 0) {
    throw DimensionError("layer_norm: empty feature dimension in shape " + shape_str(x.shape()));
  }
  if (!(eps > 0.0)) throw DomainError("layer_norm: eps must be positive");
  const std::size_t c = x.shape().back();
  if (gamma.numel() != c || beta.numel() != c) {
    throw DimensionError("layer_norm: gamma/beta shapes " + shape_str(gamma.shape()) + ", " +
                         shape_str(beta.shape()) + " do not match features " + std::to_string(c));
  }
  const std::size_t rows = x.numel() / c;
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += row[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mean) * is;
      xhat[r * c + j] = h;
      out[r * c + j] = gd[j] * h + bd[j];
    }
  }
  const bool track = should_record({&x, &gamma, &beta});
  Tensor y = make_output("layer_norm", x.shape(), std::move(out), track);
  if (track) {
    active_tape()->record(
        [x, gamma, beta, y, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, c] {
          if (!has_upstream(y)) return;
          const auto& gy = y.node()->grad;
          auto gd = gamma.data();
          if (gamma.requires_grad() || beta.requires_grad()) {
            auto& gg = grad_of(gamma);
            auto& gb = grad_of(beta);
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t j = 0; j < c; ++j) {
                gg[j] += gy[r * c + j] * xhat[r * c + j];
                gb[j] += gy[r * c + j];
              }
            }
          }
          if (x.requires_grad()) {
            auto& gx = grad_of(x);
            const double inv_c = 1.0 / static_cast<double>(c);
            for (std::size_t r = 0; r < rows; ++r) {
              double mean_d = 0.0;
              double mean_dx = 0.0;
              for (std::size_t j = 0; j < c; ++j) {
                const double d = gy[r * c + j] * gd[j];
                mean_d += d;
                mean_dx += d * xhat[r * c + j];
              }
              mean_d *= inv_c;
              mean_dx *= inv_c;
              for (std::size_t j = 0; j < c; ++j) {
                const double d = gy[r * c + j] * gd[j];
                gx[r * c + j] += inv_std[r] * (d - mean_d - xhat[r * c + j] * mean_dx);
              }
            }
          }
        });
  }
  return y;
}

Tensor dropout(const Tensor& x, double p, bool training, std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw DomainError("dropout: p must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) {
    // Identity: pass the handle through so no op is recorded.
    return x;
  }
  const std::size_t n = x.numel();
  std::vector<double> mask(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  for (auto& m : mask) m = uniform(rng) < p ? 0.0 : keep_scale;
  std::vector<double> out(n);
  auto xd = x.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = xd[i] * mask[i];
  const bool track = should_record({&x});
  Tensor y = make_output("dropout", x.shape(), std::move(out), track);
  if (track) {
    active_tape()->record([x, y, mask = std::move(mask)] {
      if (!has_upstream(y)) return;
      const auto& gy = y.node()->grad;
      auto& gx = grad_of(x);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * mask[i];
    });
  }
  return y;
}

Tensor softmax_weights(const Tensor& v, double tau) {
  if (!(tau > 0.0)) throw DomainError("softmax_weights: tau must be positive");
  if (v.rank() != 1 || v.numel() == 0) {
    throw DimensionError("softmax_weights: expected nonempty 1-D tensor, got " +
                         shape_str(v.shape()));
  }
  const std::size_t k = v.numel();
  auto vd = v.data();
  const double vmax = *std::max_element(vd.begin(), vd.end());
  std::vector<double> w(k);
  double z = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = std::exp((vd[i] - vmax) / tau);
    z += w[i];
  }
  for (auto& wi : w) wi /= z;
  const bool track = should_record({&v});
  Tensor y = make_output("softmax_weights", v.shape(), std::move(w), track);
  if (track) {
    active_tape()->record([v, y, tau, k] {
      if (!has_upstream(y)) return;
      const auto& gy = y.node()->grad;
      auto wd = y.data();
      double dot = 0.0;
      for (std::size_t i = 0; i < k; ++i) dot += gy[i] * wd[i];
      auto& gv = grad_of(v);
      for (std::size_t i = 0; i < k; ++i) gv[i] += wd[i] * (gy[i] - dot) / tau;
    });
  }
  return y;
}

Tensor cross_entropy_rows(const Tensor& logits, std::size_t label) {
  if (logits.rank() < 1 || logits.shape().back() == 0) {
    throw DimensionError("cross_entropy: empty logits " + shape_str(logits.shape()));
  }
  const std::size_t c = logits.shape().back();
  if (label >= c) {
    throw IndexError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                     std::to_string(c) + " classes");
  }
  const std::size_t rows = logits.numel() / c;
  auto ld = logits.data();
  std::vector<double> probs(logits.numel());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = ld.data() + r * c;
    const double m = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[r * c + j] = std::exp(row[j] - m);
      z += probs[r * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[r * c + j] /= z;
    loss += (m + std::log(z)) - row[label];
  }
  const bool track = should_record({&logits});
  Tensor y = make_output("cross_entropy", Shape{}, {loss}, track);
  if (track) {
    active_tape()->record([logits, y, probs = std::move(probs), label, rows, c] {
      if (!has_upstream(y)) return;
      const double g = y.node()->grad[0];
      auto& gl = grad_of(logits);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < c; ++j) {
          gl[r * c + j] += g * (probs[r * c + j] - (j == label ? 1.0 : 0.0));
        }
      }
    });
  }
  return y;
}

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  if (logits.rank() != 1) {
    throw DimensionError("cross_entropy: expected 1-D logits, got " + shape_str(logits.shape()));
  }
  return cross_entropy_rows(logits, label);
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank("slice_rows", x, 2);
  if (begin > end || end > x.dim(0)) {
    throw IndexError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + shape_str(x.shape()));
  }
  const std::size_t c = x.dim(1);
  auto xd = x.data();
  std::vector<double> out(xd.begin() + begin * c, xd.begin() + end * c);
  const bool track = should_record({&x});
  Tensor y = make_output("slice_rows", Shape{end - begin, c}, std::move(out), track);
  if (track) {
    active_tape()->record([x, y, begin, c] {
      if (!has_upstream(y)) return;
      const auto& gy = y.node()->grad;
      auto& gx = grad_of(x);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[begin * c + i] += gy[i];
    });
  }
  return y;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = parts[0].dim(0);
  std::size_t total = 0;
  bool track = false;
  for (const auto& p : parts) {
    require_rank("concat_cols", p, 2);
    if (p.dim(0) != rows) {
      throw DimensionError("concat_cols: row counts differ, " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    }
    total += p.dim(1);
    track = track || should_record({&p});
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.dim(1);
    auto pd = p.data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pd.data() + r * c, c, out.data() + r * total + offset);
    }
    offset += c;
  }
  Tensor y = make_output("concat_cols", Shape{rows, total}, std::move(out), track);
  if (track) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    active_tape()->record([inputs = std::move(inputs), y, rows, total] {
      if (!has_upstream(y)) return;
      const auto& gy = y.node()->grad;
      std::size_t offset = 0;
      for (const auto& p : inputs) {
        const std::size_t c = p.dim(1);
        if (p.requires_grad()) {
          auto& gp = grad_of(p);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < c; ++j) gp[r * c + j] += gy[r * total + offset + j];
          }
        }
        offset += c;
      }
    });
  }
  return y;
}

Tensor group_mean_rows(const Tensor& x, const std::vector<std::vector<std::size_t>>& groups) {
  require_rank("group_mean_rows", x, 2);
  const std::size_t c = x.dim(1);
  const std::size_t n = x.dim(0);
  std::vector<double> out(groups.size() * c, 0.0);
  auto xd = x.data();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty())
      throw ConfigError("group_mean_rows: group " + std::to_string(g) + " is empty");
    const double inv = 1.0 / static_cast<double>(groups[g].size());
    for (auto r : groups[g]) {
      if (r >= n) throw IndexError("group_mean_rows: row " + std::to_string(r) + " out of range");
      for (std::size_t j = 0; j < c; ++j) out[g * c + j] += xd[r * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out[g * c + j] *= inv;
  }
  const bool track = should_record({&x});
  Tensor y = make_output("group_mean_rows", Shape{groups.size(), c}, std::move(out), track);
  if (track) {
    active_tape()->record([x, y, groups, c] {
      if (!has_upstream(y)) return;
      const auto& gy = y.node()->grad;
      auto& gx = grad_of(x);
      for (std::size_t g = 0; g < groups.size(); ++g) {
        const double inv = 1.0 / static_cast<double>(groups[g].size());
        for (auto r : groups[g]) {
          for (std::size_t j = 0; j < c; ++j) gx[r * c + j] += gy[g * c + j] * inv;
        }
      }
    });
  }
  return y;
}

namespace {

// Unfolds one image [Ci, H, W] into columns [Ci*K*K, Ho*Wo].
void im2col(const double* img, std::size_t ci, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, double* col) {
  const std::size_t p = ho * wo;
  for (std::size_t c = 0; c < ci; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* dst = col + ((c * k + ky) * k + kx) * p;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            dst[oy * wo + ox] =
                (iy >= 0 && iy < static_cast<long>(h) && ix >= 0 && ix < static_cast<long>(w))
                    ? img[(c * h + iy) * w + ix]
                    : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, std::size_t ci, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, double* img) {
  const std::size_t p = ho * wo;
  for (std::size_t c = 0; c < ci; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* src = col + ((c * k + ky) * k + kx) * p;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            if (ix < 0 || ix >= static_cast<long>(w)) continue;
            img[(c * h + iy) * w + ix] += src[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, std::size_t stride,
              std::size_t padding) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", weight, 4);
  const std::size_t batch = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t co = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != ci || weight.dim(3) != k) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
  }
  if (stride == 0 || h + 2 * padding < k || w + 2 * padding < k) {
    throw DimensionError("conv2d: kernel does not fit input " + shape_str(x.shape()));
  }
  if (bias && bias->numel() != co) {
    throw DimensionError("conv2d: bias shape " + shape_str(bias->shape()));
  }
  const std::size_t ho = (h + 2 * padding - k) / stride + 1;
  const std::size_t wo = (w + 2 * padding - k) / stride + 1;
  const std::size_t ckk = ci * k * k;
  const std::size_t p = ho * wo;
  const bool track = should_record({&x, &weight, bias});

  std::vector<double> cols(batch * ckk * p);
  std::vector<double> out(batch * co * p);
  ConstMatMap wm(weight.data().data(), co, ckk);
  for (std::size_t b = 0; b < batch; ++b) {
    double* col = cols.data() + b * ckk * p;
    im2col(x.data().data() + b * ci * h * w, ci, h, w, k, stride, padding, ho, wo, col);
    MatMap om(out.data() + b * co * p, co, p);
    om.noalias() = wm * ConstMatMap(col, ckk, p);
    if (bias) {
      Eigen::Map<const Eigen::VectorXd> bv(bias->data().data(), co);
      om.colwise() += bv;
    }
  }
  Tensor y = make_output("conv2d", Shape{batch, co, ho, wo}, std::move(out), track);
  if (track) {
    Tensor bt = bias ? *bias : Tensor();
    const bool has_bias = bias != nullptr;
    active_tape()->record([x, weight, bt, has_bias, y, cols = std::move(cols), batch, ci, h, w, co,
                           k, stride, padding, ho, wo, ckk, p] {
      if (!has_upstream(y)) return;
      const auto& gy = y.node()->grad;
      std::vector<double> dcol;
      if (x.requires_grad()) dcol.resize(ckk * p);
      for (std::size_t b = 0; b < batch; ++b) {
        ConstMatMap gm(gy.data() + b * co * p, co, p);
        const double* col = cols.data() + b * ckk * p;
        if (weight.requires_grad()) {
          MatMap gw(grad_of(weight).data(), co, ckk);
          gw.noalias() += gm * ConstMatMap(col, ckk, p).transpose();
        }
        if (has_bias && bt.requires_grad()) {
          auto& gb = grad_of(bt);
          const double* g = gy.data() + b * co * p;
          for (std::size_t c = 0; c < co; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < p; ++i) acc += g[c * p + i];
            gb[c] += acc;
          }
        }
        if (x.requires_grad()) {
          MatMap dc(dcol.data(), ckk, p);
          dc.noalias() = ConstMatMap(weight.data().data(), co, ckk).transpose() * gm;
          col2im(dcol.data(), ci, h, w, k, stride, padding, ho, wo,
                 grad_of(x).data() + b * ci * h * w);
        }
      }
    });
  }
  return y;
}

Tensor avg_pool2d(const Tensor& x, std::size_t window) {
  require_rank("avg_pool2d", x, 4);
  const std::size_t batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (window == 0 || h % window != 0 || w % window != 0) {
    throw DimensionError("avg_pool2d: window " + std::to_string(window) + " does not tile input " +
                         shape_str(x.shape()));
  }
  const std::size_t ho = h / window, wo = w / window;
  const double inv = 1.0 / static_cast<double>(window * window);
  std::vector<double> out(batch * c * ho * wo, 0.0);
  auto xd = x.data();
  for (std::size_t bc = 0; bc < batch * c; ++bc) {
    for (std::size_t iy = 0; iy < h; ++iy) {
      for (std::size_t ix = 0; ix < w; ++ix) {
        out[(bc * ho + iy / window) * wo + ix / window] += xd[(bc * h + iy) * w + ix];
      }
    }
  }
  for (auto& v : out) v *= inv;
  const bool track = should_record({&x});
  Tensor y = make_output("avg_pool2d", Shape{batch, c, ho, wo}, std::move(out), track);
  if (track) {
    active_tape()->record([x, y, batch, c, h, w, ho, wo, window, inv] {
      if (!has_upstream(y)) return;
      const auto& gy = y.node()->grad;
      auto& gx = grad_of(x);
      for (std::size_t bc = 0; bc < batch * c; ++bc) {
        for (std::size_t iy = 0; iy < h; ++iy) {
          for (std::size_t ix = 0; ix < w; ++ix) {
            gx[(bc * h + iy) * w + ix] += inv * gy[(bc * ho + iy / window) * wo + ix / window];
          }
        }
      }
    });
  }
  return y;
}

Tensor band_mean(const Tensor& x, std::size_t row_begin, std::size_t row_end) {
  require_rank("band_mean", x, 4);
  const std::size_t batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (row_begin >= row_end || row_end > h) {
    throw IndexError("band_mean: rows [" + std::to_string(row_begin) + ", " +
                     std::to_string(row_end) + ") outside height " + std::to_string(h));
  }
  const double inv = 1.0 / static_cast<double>((row_end - row_begin) * w);
  std::vector<double> out(batch * c, 0.0);
  auto xd = x.data();
  for (std::size_t bc = 0; bc < batch * c; ++bc) {
    double s = 0.0;
    for (std::size_t iy = row_begin; iy < row_end; ++iy) {
      for (std::size_t ix = 0; ix < w; ++ix) s += xd[(bc * h + iy) * w + ix];
    }
    out[bc] = s * inv;
  }
  const bool track = should_record({&x});
  Tensor y = make_output("band_mean", Shape{batch, c}, std::move(out), track);
  if (track) {
    active_tape()->record([x, y, batch, c, h, w, row_begin, row_end, inv] {
      if (!has_upstream(y)) return;
      const auto& gy = y.node()->grad;
      auto& gx = grad_of(x);
      for (std::size_t bc = 0; bc < batch * c; ++bc) {
        for (std::size_t iy = row_begin; iy < row_end; ++iy) {
          for (std::size_t ix = 0; ix < w; ++ix) gx[(bc * h + iy) * w + ix] += gy[bc] * inv;
        }
      }
    });
  }
  return y;
}

}  // namespace kmp::ops
