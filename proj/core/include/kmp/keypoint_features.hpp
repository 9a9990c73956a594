#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "kmp/numerics/tensor.hpp"

namespace kmp {

// Per-frame 2-D joint positions (input-image pixels) with visibility flags.
struct KeypointTrack {
  std::size_t n_frames = 0;
  std::size_t n_joints = 0;
  std::vector<double> coords;         // [T][N][x, y]
  std::vector<std::uint8_t> visible;  // [T][N], 0 or 1

  KeypointTrack() = default;
  KeypointTrack(std::size_t frames, std::size_t joints);

  double x(std::size_t t, std::size_t i) const { return coords[(t * n_joints + i) * 2]; }
  double y(std::size_t t, std::size_t i) const { return coords[(t * n_joints + i) * 2 + 1]; }
  bool is_visible(std::size_t t, std::size_t i) const { return visible[t * n_joints + i] != 0; }
  void set(std::size_t t, std::size_t i, double px, double py, bool vis = true);

  // Clamps every coordinate into [0, width-1] x [0, height-1].
  void clamp_to(double width, double height);
  // Throws on inconsistent sizes or non-finite coordinates.
  void validate() const;
};

// Backbone outputs: maps[s] is [T, C_s, H_s, W_s]; strides[s] is input pixels
// per feature cell.
struct FeatureMapSet {
  std::vector<Tensor> maps;
  std::vector<std::size_t> strides;

  std::size_t n_stages() const { return maps.size(); }
  std::size_t n_frames() const { return maps.empty() ? 0 : maps.front().dim(0); }
  std::size_t channels(std::size_t stage) const { return maps.at(stage).dim(1); }
};

// Bilinear read of fm [C, H, W] at grid point (x, y) = (column, row), with the
// point clamped into the grid. Differentiable with respect to fm.
Tensor bilinear_sample(const Tensor& fm, double x, double y);

struct SamplePoint {
  std::size_t frame = 0;
  double x = 0.0;
  double y = 0.0;
  bool visible = true;
};

// Batched form: fms [T, C, H, W] -> [P, C]. Invisible points yield zero rows.
Tensor sample_points(const Tensor& fms, const std::vector<SamplePoint>& points);

// Node features [T*N, C_stage]: node (t, i) reads stage `stage` at the joint
// position divided by that stage's stride (no half-pixel offset).
Tensor extract_node_features(const FeatureMapSet& fms, std::size_t stage,
                             const KeypointTrack& track);

// (h W_up + f) W_down with row-vector convention.
Tensor fuse(const Tensor& h, const Tensor& f_nodes, const Tensor& w_up, const Tensor& w_down);

struct KinematicsKinds {
  bool coord = false;
  bool velocity = false;
  bool acceleration = false;

  bool any() const { return coord || velocity || acceleration; }
  std::size_t count() const { return int(coord) + int(velocity) + int(acceleration); }
  // "none" or a comma list of coord, velocity, acceleration.
  static KinematicsKinds parse(std::string_view text);
  std::string to_string() const;
};

// [T*N, 2*count] rows of (coord, velocity, acceleration) in that order.
// Coordinates are divided by (width, height); pass 1, 1 for raw pixels.
// Velocity at t = 0 and acceleration at t <= 1 are zero.
Tensor kinematics_features(const KeypointTrack& track, const KinematicsKinds& kinds,
                           double width = 1.0, double height = 1.0);

}  // namespace kmp
