#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "kmp/keypoint_features.hpp"
#include "kmp/numerics/tensor.hpp"

namespace kmp {

enum class Split : std::uint8_t { kTrain = 0, kQuery = 1, kGallery = 2 };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct Tracklet {
  std::size_t identity = 0;
  std::size_t camera = 0;
  Split split = Split::kTrain;
  std::vector<float> frames;  // [T, 3, H, W], values in [0, 1]
  KeypointTrack track;
};

// Tracklets of n_identities people. Identities [0, n_train_identities) are
// the training classes; the remaining identities are split into query and
// gallery tracklets.
struct Dataset {
  std::size_t n_identities = 0;
  std::size_t tracklets_per_id = 0;
  std::size_t n_train_identities = 0;
  std::size_t n_frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t n_joints = 0;
  bool include_head = false;
  std::uint64_t seed = 0;
  std::vector<Tracklet> tracklets;

  std::vector<std::size_t> indices(Split split) const;
  // Standardized network input (x - 0.5) / 0.25 as [T, 3, H, W].
  Tensor frames_tensor(std::size_t index) const;
};

struct SyntheticOptions {
  std::size_t n_identities = 64;
  std::size_t tracklets_per_id = 4;
  std::size_t n_frames = 8;
  std::size_t height = 64;
  std::size_t width = 32;
  bool include_head = false;
  std::uint64_t seed = 1;
  double train_fraction = 0.5;
  double pixel_noise = 0.05;
  std::size_t clutter_blobs = 3;
  double occluder_prob = 0.3;
};

// Procedural walkers: each identity owns a persistent per-body-part colour
// signature painted along its skeleton; tracklets add illumination change,
// background clutter, noise, skeletal jitter, walking motion, horizontal
// drift and occasional occluders. Keypoints are recorded exactly where the
// joints are painted. Deterministic in the seed.
Dataset generate_synthetic_dataset(const SyntheticOptions& options);

// Directory layout: manifest.txt, frames.f32, keypoints.f32, visibility.bits.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace kmp
