#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kmp {

using NodeId = std::size_t;
using Edge = std::pair<NodeId, NodeId>;

enum class GraphMode { kSpatial, kTemporal, kBoth };

GraphMode parse_graph_mode(std::string_view text);
std::string_view to_string(GraphMode mode);

enum class Limb { kNone, kLeftArm, kRightArm, kLeftLeg, kRightLeg };

// Body-part labels used by graph pooling.
struct JointPart {
  bool upper = true;  // false: lower body
  Limb limb = Limb::kNone;
};

// Per-frame skeleton: joints, the undirected bone list, and pooling labels.
struct JointTopology {
  std::size_t n_joints = 0;
  std::vector<Edge> edges;  // joint index pairs, stored once
  std::vector<std::string> joint_names;
  std::vector<JointPart> parts;

  // Throws ConfigError on out-of-range, self-loop or duplicate edges.
  void validate_edges() const;
  // validate_edges plus nonempty pooling groups.
  void validate() const;
  std::size_t degree(std::size_t joint) const;
  std::size_t max_degree() const;

  // Five joint groups in pooling order: whole body, upper body, lower body,
  // (left arm + right leg), (right arm + left leg).
  std::vector<std::vector<std::size_t>> pooling_groups() const;

  // Plain-text table: "joints N", then "joint <i> <name> <upper|lower> <limb>"
  // lines and "edge <i> <j>" lines.
  std::string to_table() const;
  static JointTopology from_table(std::string_view text);
};

inline constexpr std::size_t kPoolingGroups = 5;

// COCO keypoint skeleton. With the head: 17 joints and the 19 standard COCO
// bones. Without: the 12 body joints (shoulders through ankles) and the 12
// bones among them.
JointTopology coco_body_topology(bool include_head);

// Spatial-temporal graph over T frames. Node id of joint i in frame t is
// t * N + i. Spatial edges repeat the topology in every frame; temporal
// edges link joint i in frame t to joint i in frame t + 1.
struct SkeletonGraph {
  std::size_t n_frames = 0;
  JointTopology topology;
  GraphMode mode = GraphMode::kBoth;
  std::vector<Edge> spatial_edges;
  std::vector<Edge> temporal_edges;

  std::size_t n_joints() const { return topology.n_joints; }
  std::size_t n_nodes() const { return n_frames * topology.n_joints; }
  NodeId node(std::size_t frame, std::size_t joint) const {
    return frame * topology.n_joints + joint;
  }
};

SkeletonGraph build_graph(const JointTopology& topology, std::size_t n_frames, GraphMode mode);

// Every u joined to v by an edge in either set, ascending, excluding v.
std::vector<NodeId> neighbors(const SkeletonGraph& graph, NodeId v);

// Compressed neighbour lists for all nodes; both edge directions included.
struct Adjacency {
  std::vector<std::size_t> offsets;  // n_nodes + 1
  std::vector<NodeId> indices;

  std::size_t n_nodes() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t n_directed_edges() const { return indices.size(); }
};

Adjacency adjacency(const SkeletonGraph& graph);

}  // namespace kmp
