#include "kmp/model/kmpnet.hpp"

#include <algorithm>

#include "kmp/error.hpp"
#include "kmp/numerics/ops.hpp"

namespace kmp {

std::vector<Tensor> KmpOutput::all_logits() const {
  std::vector<Tensor> out = visual_logits;
  out.insert(out.end(), graph_logits.begin(), graph_logits.end());
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> stripe_bands(std::size_t height, std::size_t k) {
  if (k == 0 || height < k) {
    throw ConfigError("part_pool: cannot split " + std::to_string(height) + " rows into " +
                      std::to_string(k) + " stripes");
  }
  std::vector<std::pair<std::size_t, std::size_t>> bands;
  const std::size_t base = height / k, extra = height % k;
  std::size_t row = 0;
  for (std::size_t b = 0; b < k; ++b) {
    const std::size_t rows = base + (b < extra ? 1 : 0);
    bands.emplace_back(row, row + rows);
    row += rows;
  }
  return bands;
}

std::vector<Tensor> part_pool(const Tensor& fm, std::size_t k) {
  if (fm.rank() != 4) {
    throw DimensionError("part_pool: expected [B, C, H, W], got " + shape_str(fm.shape()));
  }
  std::vector<Tensor> out;
  for (auto [b, e] : stripe_bands(fm.dim(2), k)) out.push_back(ops::band_mean(fm, b, e));
  return out;
}

Tensor joint_loss(const std::vector<Tensor>& logits, std::size_t label) {
  if (logits.empty()) throw ConfigError("joint_loss: no classifier outputs");
  Tensor total = ops::cross_entropy_rows(logits[0], label);
  for (std::size_t i = 1; i < logits.size(); ++i) {
    total = ops::add(total, ops::cross_entropy_rows(logits[i], label));
  }
  return total;
}

KmpNet::KmpNet(ModelConfig config, std::uint64_t init_seed)
    : config_(std::move(config)), topology_(coco_body_topology(config_.include_head)) {
  if (config_.n_classes < 1) throw ConfigError("model: need at least one class");
  const std::size_t d = config_.embed_dim;
  const auto& ch = config_.channels;
  backbone_ = make_backbone(params_, "visual.backbone", ch, init_seed);
  for (std::size_t i = 0; i < config_.stripes; ++i) {
    const std::string p = "visual.stripe" + std::to_string(i);
    stripe_proj_.push_back(make_linear(params_, p + ".proj", ch[4], d, init_seed));
    stripe_cls_.push_back(make_linear(params_, p + ".cls", d, config_.n_classes, init_seed));
  }
  if (!config_.graph_branch) return;

  auto fusion = [&](std::size_t slot, std::size_t c) {
    const std::string p = "graph.fuse" + std::to_string(slot);
    fuse_up_[slot] = params_.add(p + ".up", scaled_normal(Shape{kNodeDim, c}, kNodeDim, 1.0,
                                                          parameter_seed(init_seed, p + ".up")));
    fuse_down_[slot] = params_.add(
        p + ".down",
        scaled_normal(Shape{c, kNodeDim}, c, 1.0, parameter_seed(init_seed, p + ".down")));
  };
  if (config_.kinematics.any()) {
    kin_encoder_ = make_linear(params_, "graph.p0.encoder", 2 * config_.kinematics.count(),
                               kNodeDim, init_seed);
    p0_block_ = make_gcn_block(params_, "graph.p0.block0", kNodeDim, config_.mlp_hidden,
                               config_.gcn_dropout, init_seed);
    fusion(0, ch[1]);
  } else {
    encoder_ = make_linear(params_, "graph.encoder", ch[1], kNodeDim, init_seed);
  }
  for (std::size_t s = 0; s < 4; ++s) {
    if (s > 0) fusion(s, ch[s + 1]);
    stages_.push_back(make_gcn_stage(params_, "graph.p" + std::to_string(s + 1),
                                     config_.stage_blocks[s], kNodeDim, config_.mlp_hidden,
                                     config_.gcn_dropout, init_seed));
  }
  head_gamma_ = params_.add("graph.head.ln.gamma", Tensor::full(Shape{kNodeDim}, 1.0));
  head_beta_ = params_.add("graph.head.ln.beta", Tensor::zeros(Shape{kNodeDim}));
  for (std::size_t g = 0; g < kPoolingGroups; ++g) {
    const std::string p = "graph.pool" + std::to_string(g);
    pool_proj_.push_back(make_linear(params_, p + ".proj", kNodeDim, d, init_seed));
    pool_cls_.push_back(make_linear(params_, p + ".cls", d, config_.n_classes, init_seed));
  }
}

std::size_t KmpNet::n_classifiers() const { return stripe_cls_.size() + pool_cls_.size(); }

KmpOutput KmpNet::visual_forward(const FeatureMapSet& fms, bool with_logits) const {
  KmpOutput out;
  auto stripes = part_pool(fms.maps.back(), config_.stripes);
  for (std::size_t i = 0; i < stripes.size(); ++i) {
    out.visual_embeddings.push_back(stripe_proj_[i](stripes[i]));
    if (with_logits) out.visual_logits.push_back(stripe_cls_[i](out.visual_embeddings.back()));
  }
  return out;
}

std::vector<Tensor> KmpNet::visual_embeddings(const Tensor& frames) const {
  return visual_forward(backbone_forward(backbone_, frames), false).visual_embeddings;
}

KmpOutput KmpNet::forward(const Tensor& frames, const KeypointTrack& track, bool training,
                          std::uint64_t dropout_seed, bool with_graph) const {
  FeatureMapSet fms = backbone_forward(backbone_, frames);
  KmpOutput out = visual_forward(fms, true);
  if (!config_.graph_branch || !with_graph) return out;

  const std::size_t frames_n = fms.n_frames();
  if (track.n_frames != frames_n || track.n_joints != topology_.n_joints) {
    throw DimensionError("forward: keypoint track is " + std::to_string(track.n_frames) + "x" +
                         std::to_string(track.n_joints) + ", expected " + std::to_string(frames_n) +
                         "x" + std::to_string(topology_.n_joints));
  }
  const Adjacency adj = adjacency(build_graph(topology_, frames_n, config_.mode));
  Tensor f1 = extract_node_features(fms, 1, track);
  Tensor h;
  if (config_.kinematics.any()) {
    Tensor kin =
        kinematics_features(track, config_.kinematics, static_cast<double>(config_.image_width),
                            static_cast<double>(config_.image_height));
    h = kin_encoder_(kin);
    h = gcn_block_forward(h, adj, *p0_block_, training, dropout_seed ^ 0x5bd1e995ULL);
    h = fuse(h, f1, fuse_up_[0], fuse_down_[0]);
  } else {
    h = encoder_(f1);
  }
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    if (s > 0) {
      h = fuse(h, extract_node_features(fms, s + 1, track), fuse_up_[s], fuse_down_[s]);
    }
    h = gcn_stage_forward(h, adj, stages_[s], training, dropout_seed + 1000003ULL * (s + 1));
  }
  h = ops::relu(ops::layer_norm(h, head_gamma_, head_beta_));
  out.graph_embeddings = graph_pool(h, topology_, frames_n, pool_proj_);
  for (std::size_t g = 0; g < out.graph_embeddings.size(); ++g) {
    out.graph_logits.push_back(pool_cls_[g](out.graph_embeddings[g]));
  }
  return out;
}

std::size_t KmpNet::load_matching(const ParameterStore& other) {
  std::size_t copied = 0;
  for (const auto& p : other.all()) {
    if (!params_.contains(p.name)) continue;
    Tensor dst = params_.get(p.name);
    if (dst.shape() != p.tensor.shape()) {
      throw IntegrityError("parameter '" + p.name + "' has shape " + shape_str(p.tensor.shape()) +
                           ", model expects " + shape_str(dst.shape()));
    }
    std::copy(p.tensor.data().begin(), p.tensor.data().end(), dst.mutable_data().begin());
    ++copied;
  }
  return copied;
}

}  // namespace kmp
