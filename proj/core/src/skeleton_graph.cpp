#include "kmp/skeleton_graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "kmp/error.hpp"

namespace kmp {

namespace {

constexpr const char* kCocoNames[17] = {
    "nose",           "left_eye",   "right_eye",   "left_ear",   "right_ear",   "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist", "left_hip",
    "right_hip",      "left_knee",  "right_knee",  "left_ankle", "right_ankle"};

// The 19 COCO bones, 0-based.
constexpr std::pair<int, int> kCocoEdges[19] = {
    {15, 13}, {13, 11}, {16, 14}, {14, 12}, {11, 12}, {5, 11}, {6, 12}, {5, 6}, {5, 7}, {6, 8},
    {7, 9},   {8, 10},  {1, 2},   {0, 1},   {0, 2},   {1, 3},  {2, 4},  {3, 5}, {4, 6}};

constexpr int kFirstBodyJoint = 5;

JointPart coco_part(int coco_index) {
  switch (coco_index) {
    case 5:
    case 7:
    case 9:
      return {true, Limb::kLeftArm};
    case 6:
    case 8:
    case 10:
      return {true, Limb::kRightArm};
    case 11:
    case 13:
    case 15:
      return {false, Limb::kLeftLeg};
    case 12:
    case 14:
    case 16:
      return {false, Limb::kRightLeg};
    default:
      return {true, Limb::kNone};  // head
  }
}

std::string_view limb_name(Limb limb) {
  switch (limb) {
    case Limb::kLeftArm:
      return "left_arm";
    case Limb::kRightArm:
      return "right_arm";
    case Limb::kLeftLeg:
      return "left_leg";
    case Limb::kRightLeg:
      return "right_leg";
    case Limb::kNone:
      break;
  }
  return "none";
}

Limb parse_limb(std::string_view s, std::size_t line) {
  if (s == "left_arm") return Limb::kLeftArm;
  if (s == "right_arm") return Limb::kRightArm;
  if (s == "left_leg") return Limb::kLeftLeg;
  if (s == "right_leg") return Limb::kRightLeg;
  if (s == "none") return Limb::kNone;
  throw ParseError(line, "unknown limb '" + std::string(s) + "'");
}

}  // namespace

GraphMode parse_graph_mode(std::string_view text) {
  if (text == "spatial") return GraphMode::kSpatial;
  if (text == "temporal") return GraphMode::kTemporal;
  if (text == "both") return GraphMode::kBoth;
  throw ConfigError("unknown graph mode '" + std::string(text) +
                    "' (expected spatial, temporal or both)");
}

std::string_view to_string(GraphMode mode) {
  switch (mode) {
    case GraphMode::kSpatial:
      return "spatial";
    case GraphMode::kTemporal:
      return "temporal";
    case GraphMode::kBoth:
      break;
  }
  return "both";
}

void JointTopology::validate_edges() const {
  if (joint_names.size() != n_joints || parts.size() != n_joints) {
    throw ConfigError("topology: names/parts must cover all " + std::to_string(n_joints) +
                      " joints");
  }
  std::set<Edge> seen;
  for (auto [a, b] : edges) {
    if (a >= n_joints || b >= n_joints) {
      throw ConfigError("topology: edge (" + std::to_string(a) + ", " + std::to_string(b) +
                        ") out of range");
    }
    if (a == b) throw ConfigError("topology: self-loop at joint " + std::to_string(a));
    if (!seen.insert(std::minmax(a, b)).second) {
      throw ConfigError("topology: duplicate edge (" + std::to_string(a) + ", " +
                        std::to_string(b) + ")");
    }
  }
}

void JointTopology::validate() const {
  validate_edges();
  for (const auto& group : pooling_groups()) {
    if (group.empty()) throw ConfigError("topology: empty pooling group");
  }
}

std::size_t JointTopology::degree(std::size_t joint) const {
  std::size_t d = 0;
  for (auto [a, b] : edges) d += (a == joint) + (b == joint);
  return d;
}

std::size_t JointTopology::max_degree() const {
  std::size_t m = 0;
  for (std::size_t j = 0; j < n_joints; ++j) m = std::max(m, degree(j));
  return m;
}

std::vector<std::vector<std::size_t>> JointTopology::pooling_groups() const {
  std::vector<std::vector<std::size_t>> groups(kPoolingGroups);
  for (std::size_t j = 0; j < n_joints; ++j) {
    const auto& p = parts[j];
    groups[0].push_back(j);
    groups[p.upper ? 1 : 2].push_back(j);
    if (p.limb == Limb::kLeftArm || p.limb == Limb::kRightLeg) groups[3].push_back(j);
    if (p.limb == Limb::kRightArm || p.limb == Limb::kLeftLeg) groups[4].push_back(j);
  }
  return groups;
}

std::string JointTopology::to_table() const {
  std::ostringstream os;
  os << "joints " << n_joints << '\n';
  for (std::size_t j = 0; j < n_joints; ++j) {
    os << "joint " << j << ' ' << joint_names[j] << ' ' << (parts[j].upper ? "upper" : "lower")
       << ' ' << limb_name(parts[j].limb) << '\n';
  }
  for (auto [a, b] : edges) os << "edge " << a << ' ' << b << '\n';
  return os.str();
}

JointTopology JointTopology::from_table(std::string_view text) {
  JointTopology topo;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool have_count = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind) || kind.starts_with('#')) continue;
    if (kind == "joints") {
      if (!(ls >> topo.n_joints)) throw ParseError(line_no, "bad joint count");
      topo.joint_names.assign(topo.n_joints, "");
      topo.parts.assign(topo.n_joints, {});
      have_count = true;
    } else if (kind == "joint") {
      std::size_t idx;
      std::string name, half, limb;
      if (!have_count || !(ls >> idx >> name >> half >> limb) || idx >= topo.n_joints ||
          (half != "upper" && half != "lower")) {
        throw ParseError(line_no, "malformed joint row");
      }
      topo.joint_names[idx] = name;
      topo.parts[idx] = {half == "upper", parse_limb(limb, line_no)};
    } else if (kind == "edge") {
      std::size_t a, b;
      if (!(ls >> a >> b)) throw ParseError(line_no, "malformed edge row");
      topo.edges.emplace_back(a, b);
    } else {
      throw ParseError(line_no, "unknown row kind '" + kind + "'");
    }
  }
  topo.validate();
  return topo;
}

JointTopology coco_body_topology(bool include_head) {
  JointTopology topo;
  const int first = include_head ? 0 : kFirstBodyJoint;
  for (int c = first; c < 17; ++c) {
    topo.joint_names.emplace_back(kCocoNames[c]);
    topo.parts.push_back(coco_part(c));
  }
  topo.n_joints = topo.joint_names.size();
  for (auto [a, b] : kCocoEdges) {
    if (a < first || b < first) continue;
    topo.edges.emplace_back(static_cast<std::size_t>(a - first),
                            static_cast<std::size_t>(b - first));
  }
  topo.validate();
  return topo;
}

SkeletonGraph build_graph(const JointTopology& topology, std::size_t n_frames, GraphMode mode) {
  if (n_frames < 1) throw DomainError("build_graph: need at least one frame");
  topology.validate_edges();
  SkeletonGraph g;
  g.n_frames = n_frames;
  g.topology = topology;
  g.mode = mode;
  const std::size_t n = topology.n_joints;
  if (mode != GraphMode::kTemporal) {
    g.spatial_edges.reserve(n_frames * topology.edges.size());
    for (std::size_t t = 0; t < n_frames; ++t) {
      for (auto [a, b] : topology.edges) g.spatial_edges.emplace_back(t * n + a, t * n + b);
    }
  }
  if (mode != GraphMode::kSpatial) {
    g.temporal_edges.reserve((n_frames - 1) * n);
    for (std::size_t t = 0; t + 1 < n_frames; ++t) {
      for (std::size_t i = 0; i < n; ++i) g.temporal_edges.emplace_back(t * n + i, (t + 1) * n + i);
    }
  }
  return g;
}

std::vector<NodeId> neighbors(const SkeletonGraph& graph, NodeId v) {
  if (v >= graph.n_nodes()) {
    throw IndexError("neighbors: node " + std::to_string(v) + " outside graph of " +
                     std::to_string(graph.n_nodes()) + " nodes");
  }
  std::vector<NodeId> out;
  for (const auto* set : {&graph.spatial_edges, &graph.temporal_edges}) {
    for (auto [a, b] : *set) {
      if (a == v) out.push_back(b);
      if (b == v) out.push_back(a);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Adjacency adjacency(const SkeletonGraph& graph) {
  const std::size_t n = graph.n_nodes();
  std::vector<std::vector<NodeId>> lists(n);
  for (const auto* set : {&graph.spatial_edges, &graph.temporal_edges}) {
    for (auto [a, b] : *set) {
      lists[a].push_back(b);
      lists[b].push_back(a);
    }
  }
  Adjacency adj;
  adj.offsets.reserve(n + 1);
  adj.offsets.push_back(0);
  for (auto& l : lists) {
    std::sort(l.begin(), l.end());
    adj.indices.insert(adj.indices.end(), l.begin(), l.end());
    adj.offsets.push_back(adj.indices.size());
  }
  return adj;
}

}  // namespace kmp
