#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kmp/keypoint_features.hpp"
#include "kmp/numerics/parameters.hpp"

namespace kmp {

inline constexpr std::size_t kBackboneStages = 5;
using StageChannels = std::array<std::size_t, kBackboneStages>;
inline constexpr StageChannels kDefaultChannels = {8, 16, 32, 64, 64};
// Cumulative strides of stem, conv stages 1-4 (the last stage keeps stride 1).
inline constexpr std::array<std::size_t, kBackboneStages> kStageStrides = {4, 4, 8, 16, 16};

struct ConvLayer {
  Tensor weight;  // [Co, Ci, 3, 3]
  Tensor bias;    // [Co]
  std::size_t stride = 1;
};

struct BackboneStage {
  std::vector<ConvLayer> convs;  // each followed by ReLU
  std::size_t pool = 1;          // average pool window after the convs
};

// Small plain CNN with the stride layout of a last-stride-1 ResNet-50:
// stem (conv s2 + pool 2), stage 1 (s1), stage 2 (s2), stage 3 (s2),
// stage 4 (s1). Every conv is 3x3 with padding 1.
struct VisualBackbone {
  std::vector<BackboneStage> stages;
  StageChannels channels{};
};

VisualBackbone make_backbone(ParameterStore& store, const std::string& prefix,
                             const StageChannels& channels, std::uint64_t seed);

// frames [T, 3, H, W] with H, W multiples of 16.
FeatureMapSet backbone_forward(const VisualBackbone& backbone, const Tensor& frames);

}  // namespace kmp
