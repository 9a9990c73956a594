#include "kmp/model/gradcheck_suite.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "kmp/graph_conv.hpp"
#include "kmp/keypoint_features.hpp"
#include "kmp/model/backbone.hpp"
#include "kmp/model/kmpnet.hpp"
#include "kmp/numerics/ops.hpp"
#include "kmp/numerics/parameters.hpp"

namespace kmp {

namespace {

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : seed_(seed) {}

  Tensor randn(Shape shape, double sd = 1.0) {
    const std::uint64_t seed = parameter_seed(seed_, "x" + std::to_string(counter_++));
    return scaled_normal(std::move(shape), 1, sd * sd, seed);
  }

  // Values bounded away from zero so ReLU kinks stay out of reach of h.
  Tensor away_from_zero(Shape shape) {
    Tensor t = randn(std::move(shape));
    for (double& v : t.mutable_data()) v = v >= 0 ? v + 0.1 : v - 0.1;
    return t;
  }

  // Reduces y to a scalar with fixed random weights so every output
  // element carries a distinct upstream gradient.
  Tensor project(const Tensor& y) {
    auto it = weights_.find(y.shape());
    if (it == weights_.end()) it = weights_.emplace(y.shape(), randn(y.shape())).first;
    return ops::sum(ops::mul(y, it->second));
  }

  void run(const std::string& name, ParameterStore& store, const std::function<Tensor()>& f,
           double tolerance = kOpTolerance, std::size_t sample = 0) {
    const auto start = std::chrono::steady_clock::now();
    GradCheckOptions o;
    o.max_elements_per_param = sample;
    o.sample_seed = seed_;
    SuiteCase c;
    c.name = name;
    c.tolerance = tolerance;
    c.report = check_gradients(f, store.all(), o);
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    cases_.push_back(std::move(c));
  }

  std::vector<SuiteCase> take() { return std::move(cases_); }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::size_t counter_ = 0;
  std::map<Shape, Tensor> weights_;
  std::vector<SuiteCase> cases_;
};

KeypointTrack random_track(std::size_t frames, std::size_t joints, double w, double h,
                           std::uint64_t seed) {
  KeypointTrack track(frames, joints);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, w - 1), uy(0.0, h - 1);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < joints; ++j) track.set(t, j, ux(rng), uy(rng), (t + j) % 7 != 3);
  }
  return track;
}

void elementwise_ops(Suite& s) {
  {
    ParameterStore p;
    Tensor x = p.add("x", s.randn({3, 4})), w = p.add("w", s.randn({4, 5})),
           b = p.add("b", s.randn({5}));
    s.run("linear", p, [&] { return s.project(ops::linear(x, w, &b)); });
  }
  {
    ParameterStore p;
    Tensor x = p.add("x", s.randn({2, 3, 4})), w = p.add("w", s.randn({4, 2}));
    s.run("linear_batched_no_bias", p, [&] { return s.project(ops::linear(x, w)); });
  }
  {
    ParameterStore p;
    Tensor a = p.add("a", s.randn({3, 4})), b = p.add("b", s.randn({4, 2}));
    s.run("matmul", p, [&] { return s.project(ops::matmul(a, b)); });
  }
  {
    ParameterStore p;
    Tensor a = p.add("a", s.randn({3, 4})), b = p.add("b", s.randn({3, 4}));
    s.run("add", p, [&] { return s.project(ops::add(a, b)); });
    s.run("sub", p, [&] { return s.project(ops::sub(a, b)); });
    s.run("mul", p, [&] { return s.project(ops::mul(a, b)); });
    s.run("scale", p, [&] { return s.project(ops::scale(a, -1.7)); });
    s.run("add_scalar", p, [&] { return s.project(ops::add_scalar(a, 0.3)); });
    s.run("softplus", p, [&] { return s.project(ops::softplus(a)); });
    s.run("sum", p, [&] { return ops::sum(ops::mul(a, a)); });
    s.run("reshape", p, [&] { return s.project(ops::reshape(a, {2, 6})); });
  }
  {
    ParameterStore p;
    Tensor x = p.add("x", s.away_from_zero({4, 5}));
    s.run("relu", p, [&] { return s.project(ops::relu(x)); });
  }
  {
    ParameterStore p;
    Tensor x = p.add("x", s.randn({4, 6})), g = p.add("gamma", s.randn({6})),
           b = p.add("beta", s.randn({6}));
    s.run("layer_norm", p, [&] { return s.project(ops::layer_norm(x, g, b)); });
  }
  {
    ParameterStore p;
    Tensor x = p.add("x", s.randn({5, 4}));
    s.run("dropout", p, [&] { return s.project(ops::dropout(x, 0.3, true, 11)); });
  }
  {
    ParameterStore p;
    Tensor v = p.add("v", s.randn({6}));
    s.run("softmax_weights", p, [&] { return s.project(ops::softmax_weights(v, 0.7)); });
  }
  {
    ParameterStore p;
    Tensor l = p.add("logits", s.randn({7}, 2.0)), r = p.add("rows", s.randn({3, 7}, 2.0));
    s.run("cross_entropy", p, [&] { return ops::cross_entropy(l, 2); });
    s.run("cross_entropy_rows", p, [&] { return ops::cross_entropy_rows(r, 5); });
  }
  {
    ParameterStore p;
    Tensor a = p.add("a", s.randn({5, 3})), b = p.add("b", s.randn({5, 2}));
    s.run("slice_rows", p, [&] { return s.project(ops::slice_rows(a, 1, 4)); });
    s.run("concat_cols", p, [&] {
      const Tensor parts[] = {a, b, a};
      return s.project(ops::concat_cols(parts));
    });
    s.run("group_mean_rows", p,
          [&] { return s.project(ops::group_mean_rows(a, {{0, 2, 4}, {1}, {3, 3, 0}})); });
  }
}

void spatial_ops(Suite& s) {
  {
    ParameterStore p;
    Tensor x = p.add("x", s.randn({2, 3, 6, 5})), w = p.add("w", s.randn({4, 3, 3, 3})),
           b = p.add("b", s.randn({4}));
    s.run("conv2d_stride1", p, [&] { return s.project(ops::conv2d(x, w, &b, 1, 1)); });
    s.run("conv2d_stride2", p, [&] { return s.project(ops::conv2d(x, w, &b, 2, 1)); });
  }
  {
    ParameterStore p;
    Tensor x = p.add("x", s.randn({2, 3, 4, 6}));
    s.run("avg_pool2d", p, [&] { return s.project(ops::avg_pool2d(x, 2)); });
    s.run("band_mean", p, [&] { return s.project(ops::band_mean(x, 1, 3)); });
  }
  {
    ParameterStore p;
    Tensor fm = p.add("fm", s.randn({2, 3, 5, 6}));
    const std::vector<SamplePoint> pts = {{0, 1.25, 2.5, true}, {1, 4.9, 0.1, true},
                                          {1, 0.0, 4.0, true},  {0, 5.0, 4.0, true},
                                          {0, 2.0, 2.0, false}, {1, -1.0, 7.0, true}};
    s.run("sample_points", p, [&] { return s.project(sample_points(fm, pts)); });
    Tensor single = p.add("single", s.randn({3, 5, 6}));
    s.run("bilinear_sample", p, [&] { return s.project(bilinear_sample(single, 3.3, 1.7)); });
  }
  {
    ParameterStore p;
    Tensor h = p.add("h", s.randn({6, 4})), f = p.add("f", s.randn({6, 3})),
           up = p.add("up", s.randn({4, 3})), down = p.add("down", s.randn({3, 4}));
    s.run("fuse", p, [&] { return s.project(fuse(h, f, up, down)); });
  }
}

void graph_ops(Suite& s) {
  const JointTopology topo = coco_body_topology(false);
  const Adjacency adj = adjacency(build_graph(topo, 2, GraphMode::kBoth));
  const std::size_t n = adj.n_nodes();
  {
    ParameterStore p;
    Tensor msgs = p.add("messages", s.randn({4, 3}));
    Tensor tau = p.add("tau", Tensor::scalar(0.8));
    s.run("aggregate_messages", p, [&] { return s.project(aggregate_messages(msgs, tau)); });
  }
  {
    ParameterStore p;
    Tensor h = p.add("h", s.away_from_zero({n, 5}));
    Tensor tau = p.add("tau", Tensor::scalar(1.3));
    s.run("node_messages", p, [&] { return s.project(node_messages(h)); });
    s.run("construct_messages", p, [&] { return s.project(construct_messages(h, adj)); });
    s.run("softmax_aggregate", p,
          [&] { return s.project(softmax_aggregate(construct_messages(h, adj), adj, tau)); });
  }
  {
    ParameterStore p;
    GraphConvLayer layer = make_graph_conv(p, "conv", 6, 10, s.seed(), 0.9);
    Tensor h = p.add("h", s.randn({n, 6})), m = p.add("m", s.randn({n, 6}));
    s.run("update_vertex", p, [&] { return s.project(update_vertex(h, m, layer)); });
    s.run("graph_conv", p, [&] { return s.project(graph_conv(h, adj, layer)); });
  }
  {
    ParameterStore p;
    GcnStage stage = make_gcn_stage(p, "stage", 2, 6, 10, 0.0, s.seed());
    Tensor h = p.add("h", s.randn({n, 6}));
    s.run("gcn_block_forward", p,
          [&] { return s.project(gcn_block_forward(h, adj, stage.blocks[0], false, 0)); });
    s.run("gcn_stage_forward", p,
          [&] { return s.project(gcn_stage_forward(h, adj, stage, false, 0)); });
  }
  {
    ParameterStore p;
    std::vector<Linear> proj;
    for (std::size_t g = 0; g < kPoolingGroups; ++g) {
      proj.push_back(make_linear(p, "pool" + std::to_string(g), 6, 3, s.seed()));
    }
    Tensor h = p.add("h", s.randn({n, 6}));
    s.run("graph_pool", p, [&] {
      const auto pooled = graph_pool(h, topo, 2, proj);
      return s.project(ops::concat_cols(pooled));
    });
  }
  {
    ParameterStore p;
    Tensor fm = p.add("fm", s.randn({2, 3, 5, 2}));
    std::vector<Linear> cls;
    for (std::size_t i = 0; i < 3; ++i) {
      cls.push_back(make_linear(p, "cls" + std::to_string(i), 3, 4, s.seed()));
    }
    s.run("part_pool+joint_loss", p, [&] {
      std::vector<Tensor> logits;
      const auto stripes = part_pool(fm, 3);
      for (std::size_t i = 0; i < stripes.size(); ++i) logits.push_back(cls[i](stripes[i]));
      return joint_loss(logits, 1);
    });
  }
}

void model_checks(Suite& s, std::size_t sample) {
  {
    ParameterStore p;
    VisualBackbone bb = make_backbone(p, "bb", {3, 4, 4, 5, 5}, s.seed());
    Tensor frame = s.randn({1, 3, 16, 16});
    s.run(
        "backbone_forward", p,
        [&] {
          const FeatureMapSet fms = backbone_forward(bb, frame);
          Tensor total = s.project(fms.maps[0]);
          for (std::size_t i = 1; i < fms.maps.size(); ++i) {
            total = ops::add(total, s.project(fms.maps[i]));
          }
          return total;
        },
        kModelTolerance);
  }
  for (bool kinematics : {false, true}) {
    ModelConfig cfg;
    cfg.n_classes = 5;
    cfg.stripes = 2;  // a 32-row frame leaves 2 rows in the final map
    cfg.image_height = 32;
    cfg.image_width = 32;
    if (kinematics) cfg.kinematics = KinematicsKinds::parse("coord,velocity,acceleration");
    KmpNet net(cfg, s.seed());
    // Zero-initialized biases put ReLUs exactly on their kink for rows with
    // zero input; move them to a generic point.
    for (const auto& param : net.params().all()) {
      if (!param.name.ends_with(".b") && !param.name.ends_with(".beta")) continue;
      Tensor noise = s.randn(param.tensor.shape(), 0.1);
      std::copy(noise.data().begin(), noise.data().end(),
                Tensor(param.tensor).mutable_data().begin());
    }
    Tensor frames = s.randn({2, 3, 32, 32});
    const KeypointTrack track = random_track(2, 12, 32, 32, s.seed() + 1);
    s.run(
        kinematics ? "kmpnet_loss_kinematics" : "kmpnet_loss", net.params(),
        [&] { return joint_loss(net.forward(frames, track, false).all_logits(), 3); },
        kModelTolerance, sample);
  }
}

}  // namespace

std::vector<SuiteCase> run_gradcheck_suite(const SuiteOptions& options) {
  Suite s(options.seed);
  elementwise_ops(s);
  spatial_ops(s);
  graph_ops(s);
  if (options.include_model) model_checks(s, options.model_sample);
  return s.take();
}

}  // namespace kmp
