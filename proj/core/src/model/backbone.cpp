#include "kmp/model/backbone.hpp"

#include "kmp/error.hpp"
#include "kmp/numerics/ops.hpp"

namespace kmp {

namespace {

ConvLayer make_conv(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                    std::size_t stride, std::uint64_t seed) {
  ConvLayer c;
  c.weight = store.add(name + ".w",
                       he_normal(Shape{out, in, 3, 3}, in * 9, parameter_seed(seed, name + ".w")));
  c.bias = store.add(name + ".b", Tensor::zeros(Shape{out}));
  c.stride = stride;
  return c;
}

}  // namespace

VisualBackbone make_backbone(ParameterStore& store, const std::string& prefix,
                             const StageChannels& channels, std::uint64_t seed) {
  VisualBackbone b;
  b.channels = channels;
  const std::array<std::size_t, kBackboneStages> conv_stride = {2, 1, 2, 2, 1};
  std::size_t in = 3;
  for (std::size_t s = 0; s < kBackboneStages; ++s) {
    BackboneStage stage;
    stage.convs.push_back(make_conv(store, prefix + ".stage" + std::to_string(s) + ".conv0", in,
                                    channels[s], conv_stride[s], seed));
    stage.pool = s == 0 ? 2 : 1;
    b.stages.push_back(std::move(stage));
    in = channels[s];
  }
  return b;
}

FeatureMapSet backbone_forward(const VisualBackbone& backbone, const Tensor& frames) {
  if (frames.rank() != 4 || frames.dim(1) != 3) {
    throw DimensionError("backbone: frames must be [T, 3, H, W], got " + shape_str(frames.shape()));
  }
  if (frames.dim(2) % 16 != 0 || frames.dim(3) % 16 != 0 || frames.dim(2) == 0 ||
      frames.dim(3) == 0) {
    throw DimensionError("backbone: frame size " + std::to_string(frames.dim(2)) + "x" +
                         std::to_string(frames.dim(3)) + " is not a multiple of 16");
  }
  FeatureMapSet out;
  Tensor x = frames;
  for (std::size_t s = 0; s < backbone.stages.size(); ++s) {
    const auto& stage = backbone.stages[s];
    for (const auto& conv : stage.convs) {
      x = ops::relu(ops::conv2d(x, conv.weight, &conv.bias, conv.stride, 1));
    }
    if (stage.pool > 1) x = ops::avg_pool2d(x, stage.pool);
    out.maps.push_back(x);
    out.strides.push_back(kStageStrides[s]);
  }
  return out;
}

}  // namespace kmp
