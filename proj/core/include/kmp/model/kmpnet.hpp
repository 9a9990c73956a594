#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kmp/graph_conv.hpp"
#include "kmp/keypoint_features.hpp"
#include "kmp/model/backbone.hpp"
#include "kmp/skeleton_graph.hpp"

namespace kmp {

inline constexpr const char* kVisualPrefix = "visual.";
inline constexpr const char* kGraphPrefix = "graph.";

struct ModelConfig {
  bool graph_branch = true;
  GraphMode mode = GraphMode::kBoth;
  bool include_head = false;
  KinematicsKinds kinematics;
  std::size_t stripes = 4;
  StageChannels channels = kDefaultChannels;
  std::size_t embed_dim = 64;
  std::size_t n_classes = 2;
  std::size_t mlp_hidden = kMlpHidden;
  double gcn_dropout = kDefaultGcnDropout;
  std::array<std::size_t, 4> stage_blocks = {kStageBlocks[0], kStageBlocks[1], kStageBlocks[2],
                                             kStageBlocks[3]};
  // Frame size; kinematics coordinates are normalized by it.
  std::size_t image_height = 64;
  std::size_t image_width = 32;
};

// Per-frame outputs of one tracklet. Each embedding/logit tensor has T rows.
struct KmpOutput {
  std::vector<Tensor> visual_embeddings;  // k x [T, embed_dim]
  std::vector<Tensor> graph_embeddings;   // 5 x [T, embed_dim] (empty without graph)
  std::vector<Tensor> visual_logits;      // k x [T, n_classes]
  std::vector<Tensor> graph_logits;       // 5 x [T, n_classes]

  // visual logits followed by graph logits
  std::vector<Tensor> all_logits() const;
};

// Dual-branch network: CNN with horizontal-stripe heads, and a graph branch
// over keypoint features taken from the four conv stages. All visual
// parameters live under "visual.", all graph parameters under "graph.".
class KmpNet {
 public:
  KmpNet(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  const JointTopology& topology() const { return topology_; }
  const VisualBackbone& backbone() const { return backbone_; }
  const std::vector<GcnStage>& gcn_stages() const { return stages_; }
  bool has_graph_branch() const { return config_.graph_branch; }
  std::size_t n_classifiers() const;

  // Visual path only; never reads graph state.
  std::vector<Tensor> visual_embeddings(const Tensor& frames) const;

  // with_graph=false skips the graph branch even if the model has one.
  KmpOutput forward(const Tensor& frames, const KeypointTrack& track, bool training,
                    std::uint64_t dropout_seed = 0, bool with_graph = true) const;

  // Copies every parameter of `other` whose name also exists here; returns
  // the number copied. Shapes must agree.
  std::size_t load_matching(const ParameterStore& other);

 private:
  KmpOutput visual_forward(const FeatureMapSet& fms, bool with_logits) const;

  ModelConfig config_;
  ParameterStore params_;
  JointTopology topology_;
  VisualBackbone backbone_;
  std::vector<Linear> stripe_proj_;
  std::vector<Linear> stripe_cls_;

  // graph branch
  Linear encoder_;      // stage-1 features -> node dim (no kinematics)
  Linear kin_encoder_;  // kinematics -> node dim
  std::optional<GcnBlock> p0_block_;
  std::array<Tensor, 4> fuse_up_;  // fuse_up_[s]: before stage p(s+1); [0] only with kinematics
  std::array<Tensor, 4> fuse_down_;
  std::vector<GcnStage> stages_;
  Tensor head_gamma_;  // LayerNorm + ReLU closing the residual stack
  Tensor head_beta_;
  std::vector<Linear> pool_proj_;
  std::vector<Linear> pool_cls_;
};

// Horizontal stripe split: k contiguous bands over H rows, remainder rows
// going to the top bands. Returns [begin, end) per band.
std::vector<std::pair<std::size_t, std::size_t>> stripe_bands(std::size_t height, std::size_t k);

// k pre-projection stripe embeddings [B, C] of fm [B, C, H, W].
std::vector<Tensor> part_pool(const Tensor& fm, std::size_t k);

// Sum over frames and classifiers of cross-entropy with a shared label.
Tensor joint_loss(const std::vector<Tensor>& logits, std::size_t label);

}  // namespace kmp
