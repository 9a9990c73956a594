#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kmp/numerics/tensor.hpp"

// Differentiable primitives. Every op computes its output eagerly and, when
// a Tape is active on this thread and some input requires a gradient, records
// the matching backward closure.
namespace kmp::ops {

// y = x W (+ b). x may have any leading dims; the last one must match W rows.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor* bias = nullptr);
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor relu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

inline constexpr double kLayerNormEps = 1e-5;

// Normalizes every row over the last dim, then applies gamma * xhat + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);

// Inverted dropout; identity when !training or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, std::uint64_t seed);

// Temperature softmax over a 1-D tensor (max-subtracted).
Tensor softmax_weights(const Tensor& v, double tau);

// -log softmax(logits)[label] for a single row of logits.
Tensor cross_entropy(const Tensor& logits, std::size_t label);
// Sum over rows of a [R, C] logit matrix, all rows sharing one label.
Tensor cross_entropy_rows(const Tensor& logits, std::size_t label);

// Row selection / composition on 2-D tensors.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_cols(std::span<const Tensor> parts);
// out[g] = mean of x rows listed in groups[g]. Every group must be nonempty.
Tensor group_mean_rows(const Tensor& x, const std::vector<std::vector<std::size_t>>& groups);

// Batched 2-D convolution: x [B, Ci, H, W], weight [Co, Ci, K, K], bias [Co].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, std::size_t stride,
              std::size_t padding);
// Non-overlapping average pooling with window == stride == `window`.
Tensor avg_pool2d(const Tensor& x, std::size_t window);
// x [B, C, H, W] -> [B, C] mean over rows [row_begin, row_end) and all cols.
Tensor band_mean(const Tensor& x, std::size_t row_begin, std::size_t row_end);

}  // namespace kmp::ops
