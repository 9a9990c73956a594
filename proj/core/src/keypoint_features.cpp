#include "kmp/keypoint_features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kmp/numerics/ops.hpp"
#include "numerics/op_support.hpp"

namespace kmp {

KeypointTrack::KeypointTrack(std::size_t frames, std::size_t joints)
    : n_frames(frames),
      n_joints(joints),
      coords(frames * joints * 2, 0.0),
      visible(frames * joints, 1) {}

void KeypointTrack::set(std::size_t t, std::size_t i, double px, double py, bool vis) {
  coords[(t * n_joints + i) * 2] = px;
  coords[(t * n_joints + i) * 2 + 1] = py;
  visible[t * n_joints + i] = vis ? 1 : 0;
}

void KeypointTrack::clamp_to(double width, double height) {
  for (std::size_t k = 0; k < coords.size(); k += 2) {
    coords[k] = std::clamp(coords[k], 0.0, width - 1.0);
    coords[k + 1] = std::clamp(coords[k + 1], 0.0, height - 1.0);
  }
}

void KeypointTrack::validate() const {
  if (coords.size() != n_frames * n_joints * 2 || visible.size() != n_frames * n_joints) {
    throw DimensionError("keypoint track buffers do not match T=" + std::to_string(n_frames) +
                         ", N=" + std::to_string(n_joints));
  }
  for (double c : coords) {
    if (!std::isfinite(c)) throw DomainError("keypoint track holds a non-finite coordinate");
  }
}

namespace {

struct Corner {
  std::size_t y0, y1, x0, x1;
  double wy, wx;
};

Corner locate(std::size_t h, std::size_t w, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  Corner c{};
  c.x0 = w > 1 ? std::min(static_cast<std::size_t>(std::floor(x)), w - 2) : 0;
  c.y0 = h > 1 ? std::min(static_cast<std::size_t>(std::floor(y)), h - 2) : 0;
  c.x1 = w > 1 ? c.x0 + 1 : 0;
  c.y1 = h > 1 ? c.y0 + 1 : 0;
  c.wx = w > 1 ? x - static_cast<double>(c.x0) : 0.0;
  c.wy = h > 1 ? y - static_cast<double>(c.y0) : 0.0;
  return c;
}

}  // namespace

Tensor sample_points(const Tensor& fms, const std::vector<SamplePoint>& points) {
  if (fms.rank() != 4 || fms.numel() == 0) {
    throw DimensionError("sample_points: expected nonempty [T, C, H, W], got " +
                         shape_str(fms.shape()));
  }
  const std::size_t frames = fms.dim(0), c = fms.dim(1), h = fms.dim(2), w = fms.dim(3);
  const std::size_t plane = h * w;
  std::vector<Corner> corners(points.size());
  std::vector<double> out(points.size() * c, 0.0);
  auto fd = fms.data();
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto& pt = points[p];
    if (pt.frame >= frames) {
      throw IndexError("sample_points: frame " + std::to_string(pt.frame) + " out of range");
    }
    if (!std::isfinite(pt.x) || !std::isfinite(pt.y)) {
      throw DomainError("sample_points: non-finite sample location");
    }
    if (!pt.visible) continue;
    const Corner k = locate(h, w, pt.x, pt.y);
    corners[p] = k;
    const double w00 = (1 - k.wy) * (1 - k.wx), w01 = (1 - k.wy) * k.wx;
    const double w10 = k.wy * (1 - k.wx), w11 = k.wy * k.wx;
    const double* base = fd.data() + pt.frame * c * plane;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* m = base + ch * plane;
      out[p * c + ch] = w00 * m[k.y0 * w + k.x0] + w01 * m[k.y0 * w + k.x1] +
                        w10 * m[k.y1 * w + k.x0] + w11 * m[k.y1 * w + k.x1];
    }
  }
  const bool track = detail::should_record({&fms});
  Tensor y = detail::make_output("sample_points", Shape{points.size(), c}, std::move(out), track);
  if (track) {
    active_tape()->record([fms, y, points, corners = std::move(corners), c, plane, w] {
      if (!y.has_grad()) return;
      const auto& gy = y.node()->grad;
      auto& gf = detail::grad_of(fms);
      for (std::size_t p = 0; p < points.size(); ++p) {
        if (!points[p].visible) continue;
        const Corner& k = corners[p];
        const double w00 = (1 - k.wy) * (1 - k.wx), w01 = (1 - k.wy) * k.wx;
        const double w10 = k.wy * (1 - k.wx), w11 = k.wy * k.wx;
        double* base = gf.data() + points[p].frame * c * plane;
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double g = gy[p * c + ch];
          double* m = base + ch * plane;
          m[k.y0 * w + k.x0] += w00 * g;
          m[k.y0 * w + k.x1] += w01 * g;
          m[k.y1 * w + k.x0] += w10 * g;
          m[k.y1 * w + k.x1] += w11 * g;
        }
      }
    });
  }
  return y;
}

Tensor bilinear_sample(const Tensor& fm, double x, double y) {
  if (fm.rank() != 3) {
    throw DimensionError("bilinear_sample: expected [C, H, W], got " + shape_str(fm.shape()));
  }
  Tensor batched = ops::reshape(fm, Shape{1, fm.dim(0), fm.dim(1), fm.dim(2)});
  Tensor row = sample_points(batched, {SamplePoint{0, x, y, true}});
  return ops::reshape(row, Shape{fm.dim(0)});
}

Tensor extract_node_features(const FeatureMapSet& fms, std::size_t stage,
                             const KeypointTrack& track) {
  if (stage >= fms.n_stages()) {
    throw IndexError("extract_node_features: stage " + std::to_string(stage) + " of " +
                     std::to_string(fms.n_stages()));
  }
  if (track.n_frames != fms.n_frames()) {
    throw DimensionError("extract_node_features: track has " + std::to_string(track.n_frames) +
                         " frames, feature maps have " + std::to_string(fms.n_frames()));
  }
  const double stride = static_cast<double>(fms.strides.at(stage));
  std::vector<SamplePoint> points;
  points.reserve(track.n_frames * track.n_joints);
  for (std::size_t t = 0; t < track.n_frames; ++t) {
    for (std::size_t i = 0; i < track.n_joints; ++i) {
      points.push_back({t, track.x(t, i) / stride, track.y(t, i) / stride, track.is_visible(t, i)});
    }
  }
  return sample_points(fms.maps[stage], points);
}

Tensor fuse(const Tensor& h, const Tensor& f_nodes, const Tensor& w_up, const Tensor& w_down) {
  if (h.rank() != 2 || f_nodes.rank() != 2 || h.dim(0) != f_nodes.dim(0) || w_up.rank() != 2 ||
      w_down.rank() != 2 || w_up.dim(0) != h.dim(1) || w_up.dim(1) != f_nodes.dim(1) ||
      w_down.dim(0) != f_nodes.dim(1)) {
    throw DimensionError("fuse: incompatible shapes h=" + shape_str(h.shape()) +
                         " f=" + shape_str(f_nodes.shape()) + " W_up=" + shape_str(w_up.shape()) +
                         " W_down=" + shape_str(w_down.shape()));
  }
  return ops::linear(ops::add(ops::linear(h, w_up), f_nodes), w_down);
}

KinematicsKinds KinematicsKinds::parse(std::string_view text) {
  KinematicsKinds k;
  if (text == "none" || text.empty()) return k;
  std::string s(text);
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "coord")
      k.coord = true;
    else if (item == "velocity")
      k.velocity = true;
    else if (item == "acceleration")
      k.acceleration = true;
    else
      throw ConfigError("unknown kinematics kind '" + item + "'");
  }
  return k;
}

std::string KinematicsKinds::to_string() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += name;
  };
  add(coord, "coord");
  add(velocity, "velocity");
  add(acceleration, "acceleration");
  return s.empty() ? "none" : s;
}

Tensor kinematics_features(const KeypointTrack& track, const KinematicsKinds& kinds, double width,
                           double height) {
  if (!kinds.any()) throw DomainError("kinematics_features: no feature kinds selected");
  if (!(width > 0.0 && height > 0.0)) throw DomainError("kinematics_features: bad image size");
  track.validate();
  const std::size_t frames = track.n_frames, joints = track.n_joints;
  const std::size_t cols = 2 * kinds.count();
  auto pos = [&](std::size_t t, std::size_t i, int axis) {
    return axis == 0 ? track.x(t, i) / width : track.y(t, i) / height;
  };
  auto vel = [&](std::size_t t, std::size_t i, int axis) {
    return t == 0 ? 0.0 : pos(t, i, axis) - pos(t - 1, i, axis);
  };
  auto acc = [&](std::size_t t, std::size_t i, int axis) {
    return t <= 1 ? 0.0 : vel(t, i, axis) - vel(t - 1, i, axis);
  };
  std::vector<double> out(frames * joints * cols);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < joints; ++i) {
      double* row = out.data() + (t * joints + i) * cols;
      std::size_t c = 0;
      for (int axis = 0; axis < 2 && kinds.coord; ++axis) row[c + axis] = pos(t, i, axis);
      c += kinds.coord ? 2 : 0;
      for (int axis = 0; axis < 2 && kinds.velocity; ++axis) row[c + axis] = vel(t, i, axis);
      c += kinds.velocity ? 2 : 0;
      for (int axis = 0; axis < 2 && kinds.acceleration; ++axis) row[c + axis] = acc(t, i, axis);
    }
  }
  return Tensor(Shape{frames * joints, cols}, std::move(out));
}

}  // namespace kmp
