#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "kmp/error.hpp"
#include "kmp/model/dataset.hpp"
#include "kmp/numerics/parameters.hpp"

namespace kmp {

namespace {

using Rgb = std::array<double, 3>;

constexpr std::array<Rgb, 8> kPalette = {{{0.90, 0.15, 0.15},
                                          {0.15, 0.75, 0.20},
                                          {0.15, 0.25, 0.90},
                                          {0.95, 0.85, 0.15},
                                          {0.10, 0.80, 0.85},
                                          {0.80, 0.20, 0.80},
                                          {0.95, 0.95, 0.95},
                                          {0.10, 0.10, 0.10}}};

enum Part { kTorso, kLeftArm, kRightArm, kLeftLeg, kRightLeg, kHead, kParts };

struct Appearance {
  std::array<Rgb, kParts> color;
};

// COCO order; body joints are 5..16.
enum Joint {
  kNose,
  kLEye,
  kREye,
  kLEar,
  kREar,
  kLShoulder,
  kRShoulder,
  kLElbow,
  kRElbow,
  kLWrist,
  kRWrist,
  kLHip,
  kRHip,
  kLKnee,
  kRKnee,
  kLAnkle,
  kRAnkle,
  kJoints
};

struct Point {
  double x, y;
};

using Pose = std::array<Point, kJoints>;

// Vertical joint positions as fractions of body height, lateral offsets as
// fractions of body height (positive = subject's left).
Pose walking_pose(double cx, double top, double body_h, double phase, int facing,
                  std::mt19937_64& rng, double jitter) {
  std::normal_distribution<double> noise(0.0, jitter);
  const double s = std::sin(phase);
  struct JointPose {
    double lateral, vertical, swing;
  };
  const std::array<JointPose, kJoints> poses = {{{0.0, 0.085, 0.0},
                                                 {0.025, 0.065, 0.0},
                                                 {-0.025, 0.065, 0.0},
                                                 {0.05, 0.075, 0.0},
                                                 {-0.05, 0.075, 0.0},
                                                 {0.13, 0.20, 0.0},
                                                 {-0.13, 0.20, 0.0},
                                                 {0.16, 0.36, -0.03},
                                                 {-0.16, 0.36, 0.03},
                                                 {0.17, 0.50, -0.06},
                                                 {-0.17, 0.50, 0.06},
                                                 {0.08, 0.53, 0.0},
                                                 {-0.08, 0.53, 0.0},
                                                 {0.085, 0.74, 0.04},
                                                 {-0.085, 0.74, -0.04},
                                                 {0.09, 0.95, 0.08},
                                                 {-0.09, 0.95, -0.08}}};
  Pose pose{};
  for (int j = 0; j < kJoints; ++j) {
    const auto& sp = poses[j];
    pose[j].x = cx + facing * sp.lateral * body_h + sp.swing * body_h * s + noise(rng);
    pose[j].y = top + sp.vertical * body_h + noise(rng);
  }
  return pose;
}

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

bool inside_quad(Point p, const std::array<Point, 4>& q) {
  // Convex polygon, consistent winding check.
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const Point a = q[i], b = q[(i + 1) % 4];
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    const int s = cross > 0 ? 1 : (cross < 0 ? -1 : 0);
    if (s == 0) continue;
    if (sign == 0)
      sign = s;
    else if (s != sign)
      return false;
  }
  return true;
}

struct Canvas {
  std::size_t h, w;
  std::vector<double> rgb;  // [3][h][w]
  void put(std::size_t y, std::size_t x, const Rgb& c) {
    for (int k = 0; k < 3; ++k) rgb[(k * h + y) * w + x] = c[k];
  }
};

void paint_person(Canvas& cv, const Pose& p, const Appearance& app, double body_h) {
  const double arm_r = 0.032 * body_h, leg_r = 0.04 * body_h, head_r = 0.075 * body_h;
  const Point neck{(p[kLShoulder].x + p[kRShoulder].x) / 2,
                   (p[kLShoulder].y + p[kRShoulder].y) / 2};
  const Point head{neck.x, neck.y - 0.11 * body_h};
  const std::array<Point, 4> torso = {p[kLShoulder], p[kRShoulder], p[kRHip], p[kLHip]};
  for (std::size_t y = 0; y < cv.h; ++y) {
    for (std::size_t x = 0; x < cv.w; ++x) {
      const Point q{static_cast<double>(x), static_cast<double>(y)};
      const Rgb* c = nullptr;
      if (inside_quad(q, torso)) c = &app.color[kTorso];
      if (std::hypot(q.x - head.x, q.y - head.y) <= head_r) c = &app.color[kHead];
      auto limb = [&](Joint a, Joint b, Joint d, double r, Part part) {
        if (segment_distance(q, p[a], p[b]) <= r || segment_distance(q, p[b], p[d]) <= r) {
          c = &app.color[part];
        }
      };
      limb(kLHip, kLKnee, kLAnkle, leg_r, kLeftLeg);
      limb(kRHip, kRKnee, kRAnkle, leg_r, kRightLeg);
      limb(kLShoulder, kLElbow, kLWrist, arm_r, kLeftArm);
      limb(kRShoulder, kRElbow, kRWrist, arm_r, kRightArm);
      if (c) cv.put(y, x, *c);
    }
  }
}

void paint_rect(Canvas& cv, double x0, double y0, double x1, double y1, const Rgb& c) {
  const auto clampi = [](double v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(hi)));
  };
  for (std::size_t y = clampi(y0, cv.h); y < clampi(y1, cv.h); ++y) {
    for (std::size_t x = clampi(x0, cv.w); x < clampi(x1, cv.w); ++x) cv.put(y, x, c);
  }
}

}  // namespace

Dataset generate_synthetic_dataset(const SyntheticOptions& o) {
  if (o.n_identities < 1 || o.tracklets_per_id < 1 || o.n_frames < 1 || o.height < 16 ||
      o.width < 16) {
    throw ConfigError("synthetic dataset: counts must be >= 1 and frames at least 16x16");
  }
  if (!(o.train_fraction > 0.0 && o.train_fraction <= 1.0)) {
    throw ConfigError("synthetic dataset: train_fraction must be in (0, 1]");
  }
  Dataset ds;
  ds.n_identities = o.n_identities;
  ds.tracklets_per_id = o.tracklets_per_id;
  ds.n_frames = o.n_frames;
  ds.height = o.height;
  ds.width = o.width;
  ds.include_head = o.include_head;
  ds.n_joints = o.include_head ? 17 : 12;
  ds.seed = o.seed;
  ds.n_train_identities = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(o.train_fraction * o.n_identities)), 1, o.n_identities);

  const double H = static_cast<double>(o.height), W = static_cast<double>(o.width);
  const std::size_t first_joint = o.include_head ? 0 : kLShoulder;
  std::mt19937_64 id_rng(parameter_seed(o.seed, "identities"));
  std::uniform_int_distribution<std::size_t> pick_color(0, kPalette.size() - 1);

  for (std::size_t id = 0; id < o.n_identities; ++id) {
    Appearance app;
    for (auto& c : app.color) c = kPalette[pick_color(id_rng)];
    for (std::size_t k = 0; k < o.tracklets_per_id; ++k) {
      std::mt19937_64 rng(
          parameter_seed(o.seed, "tracklet/" + std::to_string(id) + "/" + std::to_string(k)));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      Tracklet tr;
      tr.identity = id;
      tr.camera = k;
      if (id < ds.n_train_identities)
        tr.split = Split::kTrain;
      else
        tr.split = k == 0 ? Split::kQuery : Split::kGallery;

      const double body_h = H * (0.80 + 0.10 * u(rng));
      const double top = (H - body_h) * u(rng) - 0.5;
      double cx = W * (0.40 + 0.20 * u(rng));
      const double drift = (u(rng) - 0.5) * 1.0;
      const int facing = u(rng) < 0.5 ? 1 : -1;
      const double phase0 = 2 * M_PI * u(rng);
      const double gain = 0.6 + 0.8 * u(rng);
      const Rgb cast = {0.1 * (u(rng) - 0.5), 0.1 * (u(rng) - 0.5), 0.1 * (u(rng) - 0.5)};
      const double bg_level = 0.3 + 0.4 * u(rng);
      struct Blob {
        double x0, y0, x1, y1;
        Rgb c;
      };
      std::vector<Blob> clutter;
      for (std::size_t b = 0; b < o.clutter_blobs; ++b) {
        const double bw = 3 + 5 * u(rng), bh = 3 + 5 * u(rng);
        const double bx = u(rng) * (W - bw), by = u(rng) * (H - bh);
        clutter.push_back({bx, by, bx + bw, by + bh, kPalette[pick_color(rng)]});
      }
      std::normal_distribution<double> pix(0.0, o.pixel_noise);

      tr.track = KeypointTrack(o.n_frames, ds.n_joints);
      tr.frames.resize(o.n_frames * 3 * o.height * o.width);
      for (std::size_t t = 0; t < o.n_frames; ++t) {
        Canvas cv{o.height, o.width, std::vector<double>(3 * o.height * o.width, bg_level)};
        for (const auto& b : clutter) paint_rect(cv, b.x0, b.y0, b.x1, b.y1, b.c);
        const Pose pose =
            walking_pose(cx, top, body_h, phase0 + 0.7 * static_cast<double>(t), facing, rng, 0.4);
        paint_person(cv, pose, app, body_h);
        if (u(rng) < o.occluder_prob) {
          const double ow = 6 + 6 * u(rng), oh = 6 + 10 * u(rng);
          const double ox = u(rng) * (W - ow), oy = u(rng) * (H - oh);
          paint_rect(cv, ox, oy, ox + ow, oy + oh, kPalette[pick_color(rng)]);
        }
        for (std::size_t c = 0; c < 3; ++c) {
          for (std::size_t i = 0; i < o.height * o.width; ++i) {
            const double v = cv.rgb[c * o.height * o.width + i] * gain + cast[c] + pix(rng);
            tr.frames[(t * 3 + c) * o.height * o.width + i] =
                static_cast<float>(std::clamp(v, 0.0, 1.0));
          }
        }
        for (std::size_t j = first_joint; j < kJoints; ++j) {
          // Stored as float32 on disk; round here so saved data reloads bit-exact.
          const double x = static_cast<float>(std::clamp(pose[j].x, 0.0, W - 1));
          const double y = static_cast<float>(std::clamp(pose[j].y, 0.0, H - 1));
          tr.track.set(t, j - first_joint, x, y, true);
        }
        cx += drift;
      }
      ds.tracklets.push_back(std::move(tr));
    }
  }
  return ds;
}

}  // namespace kmp
