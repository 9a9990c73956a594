#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kmp/numerics/parameters.hpp"
#include "kmp/numerics/tensor.hpp"
#include "kmp/skeleton_graph.hpp"

namespace kmp {

inline constexpr std::size_t kNodeDim = 64;
inline constexpr std::size_t kMlpHidden = 128;
inline constexpr double kMessageEps = 1e-7;
inline constexpr double kDefaultGcnDropout = 0.1;
// Block counts of the four graph-conv stages p1..p4.
inline constexpr std::size_t kStageBlocks[4] = {5, 7, 11, 4};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
  bool has_bias = true;

  Tensor operator()(const Tensor& x) const;
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

// Weights ~ N(0, gain / in), zero bias. Registered as <name>.w and <name>.b.
Linear make_linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                   std::uint64_t seed, bool bias = true, double gain = 1.0);

// One message-passing layer: softmax aggregation with a learnable positive
// temperature tau = softplus(rho), followed by a two-layer MLP update.
struct GraphConvLayer {
  Linear fc1;  // node_dim -> hidden
  Linear fc2;  // hidden -> node_dim
  Tensor rho;  // scalar, tau = softplus(rho)
  double eps = kMessageEps;

  Tensor tau() const;
};

GraphConvLayer make_graph_conv(ParameterStore& store, const std::string& prefix, std::size_t dim,
                               std::size_t hidden, std::uint64_t seed, double tau_init = 1.0);

// LayerNorm -> ReLU -> Dropout -> GraphConv, plus the residual input.
struct GcnBlock {
  Tensor ln_gamma;
  Tensor ln_beta;
  double dropout = kDefaultGcnDropout;
  GraphConvLayer conv;
};

GcnBlock make_gcn_block(ParameterStore& store, const std::string& prefix, std::size_t dim,
                        std::size_t hidden, double dropout, std::uint64_t seed);

struct GcnStage {
  std::vector<GcnBlock> blocks;
};

GcnStage make_gcn_stage(ParameterStore& store, const std::string& prefix, std::size_t n_blocks,
                        std::size_t dim, std::size_t hidden, double dropout, std::uint64_t seed);

// ReLU(h) + eps, one message row per source node.
Tensor node_messages(const Tensor& h, double eps = kMessageEps);

// Explicit per-directed-edge messages [E, C]; row e is the message from
// adj.indices[e] to the destination whose range contains e.
Tensor construct_messages(const Tensor& h, const Adjacency& adj, double eps = kMessageEps);

// Per destination v and channel c:
//   out[v,c] = sum_u w_u m[u,c],  w_u = softmax_u(m[u,c] / tau)
// over u in adj's neighbour list of v; nodes without neighbours get zeros.
// Differentiable in both messages and tau.
Tensor softmax_aggregate(const Tensor& messages, const Adjacency& adj, const Tensor& tau);

// Single-destination form over a [K, C] message stack; returns [C].
Tensor aggregate_messages(const Tensor& messages, const Tensor& tau);

// MLP(h + m).
Tensor update_vertex(const Tensor& h, const Tensor& m, const GraphConvLayer& layer);

Tensor graph_conv(const Tensor& x, const Adjacency& adj, const GraphConvLayer& layer);

Tensor gcn_block_forward(const Tensor& h, const Adjacency& adj, const GcnBlock& block,
                         bool training, std::uint64_t dropout_seed);

Tensor gcn_stage_forward(const Tensor& h, const Adjacency& adj, const GcnStage& stage,
                         bool training, std::uint64_t dropout_seed);

// Per-frame means of h [T*N, C] over the five pooling groups; five [T, C]
// tensors in JointTopology::pooling_groups() order.
std::vector<Tensor> graph_pool_features(const Tensor& h, const JointTopology& topology,
                                        std::size_t n_frames);

// graph_pool_features followed by one unshared projection per group.
std::vector<Tensor> graph_pool(const Tensor& h, const JointTopology& topology, std::size_t n_frames,
                               const std::vector<Linear>& projections);

}  // namespace kmp
