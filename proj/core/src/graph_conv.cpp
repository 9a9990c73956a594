#include "kmp/graph_conv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kmp/numerics/ops.hpp"
#include "numerics/op_support.hpp"

namespace kmp {

Tensor Linear::operator()(const Tensor& x) const {
  return ops::linear(x, weight, has_bias ? &bias : nullptr);
}

Linear make_linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                   std::uint64_t seed, bool bias, double gain) {
  Linear l;
  l.weight = store.add(name + ".w",
                       scaled_normal(Shape{in, out}, in, gain, parameter_seed(seed, name + ".w")));
  l.has_bias = bias;
  if (bias) l.bias = store.add(name + ".b", Tensor::zeros(Shape{out}));
  return l;
}

Tensor GraphConvLayer::tau() const { return ops::softplus(rho); }

GraphConvLayer make_graph_conv(ParameterStore& store, const std::string& prefix, std::size_t dim,
                               std::size_t hidden, std::uint64_t seed, double tau_init) {
  if (!(tau_init > 0.0)) throw DomainError("graph conv: tau_init must be positive");
  GraphConvLayer layer;
  layer.fc1 = make_linear(store, prefix + ".mlp.fc1", dim, hidden, seed, true, 2.0);
  layer.fc2 = make_linear(store, prefix + ".mlp.fc2", hidden, dim, seed, true, 1.0);
  // Inverse softplus so that tau starts at tau_init.
  layer.rho = store.add(prefix + ".rho", Tensor::scalar(std::log(std::expm1(tau_init))));
  return layer;
}

GcnBlock make_gcn_block(ParameterStore& store, const std::string& prefix, std::size_t dim,
                        std::size_t hidden, double dropout, std::uint64_t seed) {
  GcnBlock b;
  b.ln_gamma = store.add(prefix + ".ln.gamma", Tensor::full(Shape{dim}, 1.0));
  b.ln_beta = store.add(prefix + ".ln.beta", Tensor::zeros(Shape{dim}));
  b.dropout = dropout;
  b.conv = make_graph_conv(store, prefix + ".conv", dim, hidden, seed);
  return b;
}

GcnStage make_gcn_stage(ParameterStore& store, const std::string& prefix, std::size_t n_blocks,
                        std::size_t dim, std::size_t hidden, double dropout, std::uint64_t seed) {
  GcnStage s;
  for (std::size_t i = 0; i < n_blocks; ++i) {
    s.blocks.push_back(
        make_gcn_block(store, prefix + ".block" + std::to_string(i), dim, hidden, dropout, seed));
  }
  return s;
}

Tensor node_messages(const Tensor& h, double eps) { return ops::add_scalar(ops::relu(h), eps); }

Tensor construct_messages(const Tensor& h, const Adjacency& adj, double eps) {
  if (h.rank() != 2 || h.dim(0) != adj.n_nodes()) {
    throw DimensionError("construct_messages: features " + shape_str(h.shape()) +
                         " do not match graph of " + std::to_string(adj.n_nodes()) + " nodes");
  }
  const std::vector<std::vector<std::size_t>> rows = [&] {
    std::vector<std::vector<std::size_t>> r;
    r.reserve(adj.indices.size());
    for (auto u : adj.indices) r.push_back({u});
    return r;
  }();
  if (rows.empty()) return Tensor::zeros(Shape{0, h.dim(1)});
  return ops::group_mean_rows(node_messages(h, eps), rows);
}

Tensor softmax_aggregate(const Tensor& messages, const Adjacency& adj, const Tensor& tau) {
  if (messages.rank() != 2) {
    throw DimensionError("softmax_aggregate: messages must be [V, C], got " +
                         shape_str(messages.shape()));
  }
  if (tau.numel() != 1) throw DimensionError("softmax_aggregate: tau must be a scalar");
  const double t = tau.item();
  if (!(t > 0.0)) throw DomainError("softmax_aggregate: tau must be positive");
  const std::size_t n_src = messages.dim(0);
  const std::size_t c = messages.dim(1);
  const std::size_t n_dst = adj.n_nodes();
  for (auto u : adj.indices) {
    if (u >= n_src) throw IndexError("softmax_aggregate: neighbour index out of range");
  }
  auto md = messages.data();
  std::vector<double> out(n_dst * c, 0.0);
  std::vector<double> mx(c), z(c), s(c);
  for (std::size_t v = 0; v < n_dst; ++v) {
    const std::size_t b = adj.offsets[v], e = adj.offsets[v + 1];
    if (b == e) continue;
    std::fill(mx.begin(), mx.end(), -std::numeric_limits<double>::infinity());
    for (std::size_t k = b; k < e; ++k) {
      const double* m = md.data() + adj.indices[k] * c;
      for (std::size_t j = 0; j < c; ++j) mx[j] = std::max(mx[j], m[j]);
    }
    std::fill(z.begin(), z.end(), 0.0);
    std::fill(s.begin(), s.end(), 0.0);
    for (std::size_t k = b; k < e; ++k) {
      const double* m = md.data() + adj.indices[k] * c;
      for (std::size_t j = 0; j < c; ++j) {
        const double w = std::exp((m[j] - mx[j]) / t);
        z[j] += w;
        s[j] += w * m[j];
      }
    }
    for (std::size_t j = 0; j < c; ++j) out[v * c + j] = s[j] / z[j];
  }
  const bool track = detail::should_record({&messages, &tau});
  Tensor y = detail::make_output("softmax_aggregate", Shape{n_dst, c}, std::move(out), track);
  if (track) {
    active_tape()->record([messages, tau, y, adj, n_dst, c, t] {
      if (!y.has_grad()) return;
      const auto& gy = y.node()->grad;
      auto md = messages.data();
      auto yd = y.data();
      const bool want_m = messages.requires_grad();
      double* gm = want_m ? detail::grad_of(messages).data() : nullptr;
      std::vector<double> mx(c), z(c);
      double dtau = 0.0;
      for (std::size_t v = 0; v < n_dst; ++v) {
        const std::size_t b = adj.offsets[v], e = adj.offsets[v + 1];
        if (b == e) continue;
        std::fill(mx.begin(), mx.end(), -std::numeric_limits<double>::infinity());
        for (std::size_t k = b; k < e; ++k) {
          const double* m = md.data() + adj.indices[k] * c;
          for (std::size_t j = 0; j < c; ++j) mx[j] = std::max(mx[j], m[j]);
        }
        std::fill(z.begin(), z.end(), 0.0);
        for (std::size_t k = b; k < e; ++k) {
          const double* m = md.data() + adj.indices[k] * c;
          for (std::size_t j = 0; j < c; ++j) z[j] += std::exp((m[j] - mx[j]) / t);
        }
        const double* o = yd.data() + v * c;
        const double* g = gy.data() + v * c;
        // d out/d m_u = w_u (1 + (m_u - out) / tau)
        // d out/d tau = -sum_u w_u m_u (m_u - out) / tau^2
        for (std::size_t k = b; k < e; ++k) {
          const std::size_t u = adj.indices[k];
          const double* m = md.data() + u * c;
          for (std::size_t j = 0; j < c; ++j) {
            const double w = std::exp((m[j] - mx[j]) / t) / z[j];
            const double dev = m[j] - o[j];
            if (want_m) gm[u * c + j] += g[j] * w * (1.0 + dev / t);
            dtau -= g[j] * w * m[j] * dev;
          }
        }
      }
      if (tau.requires_grad()) detail::grad_of(tau)[0] += dtau / (t * t);
    });
  }
  return y;
}

Tensor aggregate_messages(const Tensor& messages, const Tensor& tau) {
  if (messages.rank() != 2) {
    throw DimensionError("aggregate_messages: expected [K, C], got " + shape_str(messages.shape()));
  }
  Adjacency one;
  one.offsets = {0, messages.dim(0)};
  one.indices.resize(messages.dim(0));
  std::iota(one.indices.begin(), one.indices.end(), std::size_t{0});
  return ops::reshape(softmax_aggregate(messages, one, tau), Shape{messages.dim(1)});
}

Tensor update_vertex(const Tensor& h, const Tensor& m, const GraphConvLayer& layer) {
  if (h.shape() != m.shape() || h.shape().back() != layer.fc1.in_features()) {
    throw DimensionError("update_vertex: h " + shape_str(h.shape()) + " / m " +
                         shape_str(m.shape()) + " do not match layer width " +
                         std::to_string(layer.fc1.in_features()));
  }
  return layer.fc2(ops::relu(layer.fc1(ops::add(h, m))));
}

Tensor graph_conv(const Tensor& x, const Adjacency& adj, const GraphConvLayer& layer) {
  if (x.rank() != 2 || x.dim(0) != adj.n_nodes()) {
    throw DimensionError("graph_conv: features " + shape_str(x.shape()) +
                         " do not match graph of " + std::to_string(adj.n_nodes()) + " nodes");
  }
  Tensor m = softmax_aggregate(node_messages(x, layer.eps), adj, layer.tau());
  return update_vertex(x, m, layer);
}

Tensor gcn_block_forward(const Tensor& h, const Adjacency& adj, const GcnBlock& block,
                         bool training, std::uint64_t dropout_seed) {
  Tensor x = ops::layer_norm(h, block.ln_gamma, block.ln_beta);
  x = ops::relu(x);
  x = ops::dropout(x, block.dropout, training, dropout_seed);
  return ops::add(h, graph_conv(x, adj, block.conv));
}

Tensor gcn_stage_forward(const Tensor& h, const Adjacency& adj, const GcnStage& stage,
                         bool training, std::uint64_t dropout_seed) {
  Tensor x = h;
  for (std::size_t i = 0; i < stage.blocks.size(); ++i) {
    x = gcn_block_forward(x, adj, stage.blocks[i], training,
                          dropout_seed * 0x9E3779B97F4A7C15ULL + i + 1);
  }
  return x;
}

std::vector<Tensor> graph_pool_features(const Tensor& h, const JointTopology& topology,
                                        std::size_t n_frames) {
  const std::size_t n = topology.n_joints;
  if (h.rank() != 2 || h.dim(0) != n_frames * n) {
    throw DimensionError("graph_pool: features " + shape_str(h.shape()) + " do not match T=" +
                         std::to_string(n_frames) + ", N=" + std::to_string(n));
  }
  std::vector<Tensor> out;
  for (const auto& group : topology.pooling_groups()) {
    if (group.empty()) throw ConfigError("graph_pool: empty pooling group");
    std::vector<std::vector<std::size_t>> rows(n_frames);
    for (std::size_t t = 0; t < n_frames; ++t) {
      for (auto j : group) rows[t].push_back(t * n + j);
    }
    out.push_back(ops::group_mean_rows(h, rows));
  }
  return out;
}

std::vector<Tensor> graph_pool(const Tensor& h, const JointTopology& topology, std::size_t n_frames,
                               const std::vector<Linear>& projections) {
  if (projections.size() != kPoolingGroups) {
    throw ConfigError("graph_pool: need " + std::to_string(kPoolingGroups) + " projections");
  }
  auto pooled = graph_pool_features(h, topology, n_frames);
  for (std::size_t g = 0; g < pooled.size(); ++g) pooled[g] = projections[g](pooled[g]);
  return pooled;
}

}  // namespace kmp
