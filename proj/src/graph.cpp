#include "gmlp/graph.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gmlp/error.hpp"

namespace gmlp {

std::size_t SkeletonTopology::root() const {
  for (std::size_t i = 0; i < parent.size(); ++i) {
    if (parent[i] == i) return i;
  }
  throw ValidationError("topology '" + name + "' has no root");
}

std::vector<std::pair<std::size_t, std::size_t>> SkeletonTopology::bones() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < parent.size(); ++i) {
    if (parent[i] != i) out.emplace_back(i, parent[i]);
  }
  return out;
}

std::vector<std::size_t> SkeletonTopology::depths() const {
  std::vector<std::size_t> depth(parent.size(), 0);
  for (std::size_t i = 0; i < parent.size(); ++i) {
    std::size_t d = 0;
    for (std::size_t j = i; parent[j] != j; j = parent[j]) ++d;
    depth[i] = d;
  }
  return depth;
}

void validate_topology(const SkeletonTopology& topo) {
  const std::size_t n = topo.num_joints();
  const std::string where = "layout '" + topo.name + "': ";
  if (n == 0) throw ValidationError(where + "no joints");
  if (!topo.joint_names.empty() && topo.joint_names.size() != n) {
    throw ValidationError(where + "joint name count differs from parent count");
  }
  std::size_t roots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (topo.parent[i] >= n) throw ValidationError(where + "parent index out of range at joint " + std::to_string(i));
    if (topo.parent[i] == i) ++roots;
  }
  if (roots != 1) throw ValidationError(where + "expected exactly one root, found " + std::to_string(roots));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i;
    std::size_t steps = 0;
    while (topo.parent[j] != j) {
      j = topo.parent[j];
      if (++steps > n) throw ValidationError(where + "parent cycle through joint " + std::to_string(i));
    }
  }
  const std::size_t root = topo.root();
  std::vector<bool> used(n, false);
  for (const auto& [l, r] : topo.symmetry_pairs) {
    if (l >= n || r >= n) throw ValidationError(where + "symmetry index out of range");
    if (l == r) throw ValidationError(where + "symmetry pair pairs a joint with itself");
    if (l == root || r == root) throw ValidationError(where + "root joint cannot have a symmetric partner");
    if (used[l] || used[r]) throw ValidationError(where + "symmetry pairs overlap");
    used[l] = used[r] = true;
  }
}

namespace {

SkeletonTopology h36m_17() {
  SkeletonTopology t;
  t.name = "h36m_17";
  t.joint_names = {"pelvis",     "right_hip",     "right_knee", "right_ankle", "left_hip",   "left_knee",
                   "left_ankle", "spine",         "thorax",     "neck",        "head",       "left_shoulder",
                   "left_elbow", "left_wrist",    "right_shoulder", "right_elbow", "right_wrist"};
  t.parent = {0, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
  t.symmetry_pairs = {{4, 1}, {5, 2}, {6, 3}, {11, 14}, {12, 15}, {13, 16}};
  return t;
}

// Small two-limb skeleton for gradient checks and unit tests.
SkeletonTopology toy_5() {
  SkeletonTopology t;
  t.name = "toy_5";
  t.joint_names = {"root", "left_hip", "right_hip", "left_foot", "right_foot"};
  t.parent = {0, 0, 0, 1, 2};
  t.symmetry_pairs = {{1, 2}, {3, 4}};
  return t;
}

}  // namespace

std::vector<std::string> registered_layouts() { return {"h36m_17", "toy_5"}; }

SkeletonTopology build_topology(std::string_view layout) {
  if (layout == "h36m_17") return h36m_17();
  if (layout == "toy_5") return toy_5();
  const std::filesystem::path path(layout);
  if (std::filesystem::is_regular_file(path)) return load_layout_file(path);
  throw LookupError("unknown skeleton layout '" + std::string(layout) + "'");
}

SkeletonTopology parse_layout_json(std::string_view text, std::string name) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("layout '" + name + "': invalid JSON: " + e.what());
  }
  SkeletonTopology t;
  t.name = std::move(name);
  try {
    t.parent = j.at("parents").get<std::vector<std::size_t>>();
    if (j.contains("joints")) t.joint_names = j.at("joints").get<std::vector<std::string>>();
    if (j.contains("symmetry")) {
      for (const auto& pair : j.at("symmetry")) {
        if (pair.size() != 2) throw ValidationError("layout '" + t.name + "': symmetry entries must be pairs");
        t.symmetry_pairs.emplace_back(pair[0].get<std::size_t>(), pair[1].get<std::size_t>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("layout '" + t.name + "': " + e.what());
  }
  if (t.joint_names.empty()) {
    for (std::size_t i = 0; i < t.parent.size(); ++i) t.joint_names.push_back("joint" + std::to_string(i));
  }
  validate_topology(t);
  return t;
}

SkeletonTopology load_layout_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open layout file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_layout_json(ss.str(), path.stem().string());
}

std::string layout_to_json(const SkeletonTopology& topo) {
  nlohmann::json j;
  j["joints"] = topo.joint_names;
  j["parents"] = topo.parent;
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [l, r] : topo.symmetry_pairs) pairs.push_back({l, r});
  j["symmetry"] = pairs;
  return j.dump(2);
}

std::size_t EdgePartition::support(std::size_t type) const {
  std::size_t count = 0;
  for (int l : labels) {
    if (l == static_cast<int>(type)) ++count;
  }
  return count;
}

std::size_t kernel_index(EdgeType type, std::size_t edge_types) {
  const auto t = static_cast<std::size_t>(type);
  switch (edge_types) {
    case 4:
      return t;
    case 3:
      return type == EdgeType::self_loop ? 0 : (type == EdgeType::symmetric ? 2 : 1);
    case 2:
      return type == EdgeType::self_loop ? 0 : 1;
    case 1:
      return 0;
    default:
      throw ValidationError("edge_types must be in 1..4, got " + std::to_string(edge_types));
  }
}

EdgePartition partition_edges(const SkeletonTopology& topo, std::size_t edge_types) {
  validate_topology(topo);
  kernel_index(EdgeType::self_loop, edge_types);  // validates edge_types
  const std::size_t n = topo.num_joints();
  EdgePartition p;
  p.num_joints = n;
  p.edge_types = edge_types;
  p.labels.assign(n * n, -1);
  auto set = [&](std::size_t i, std::size_t j, EdgeType type) {
    p.labels[i * n + j] = static_cast<int>(kernel_index(type, edge_types));
  };
  // Symmetric links first so that bones win when a pair is also a bone.
  for (const auto& [l, r] : topo.symmetry_pairs) {
    set(l, r, EdgeType::symmetric);
    set(r, l, EdgeType::symmetric);
  }
  const auto depth = topo.depths();
  for (const auto& [child, par] : topo.bones()) {
    const EdgeType type = depth[child] % 2 == 1 ? EdgeType::bone_odd_child : EdgeType::bone_even_child;
    set(child, par, type);
    set(par, child, type);
  }
  for (std::size_t i = 0; i < n; ++i) set(i, i, EdgeType::self_loop);
  return p;
}

Tensor AdjacencySet::normalized_union() const {
  Tensor total = Tensor::zeros({num_joints, num_joints});
  auto out = total.mutable_data();
  for (const Tensor& m : matrices) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += m.data()[i];
  }
  return total;
}

std::size_t AdjacencySet::total_nonzeros() const {
  std::size_t total = 0;
  for (std::size_t n : nonzeros) total += n;
  return total;
}

AdjacencySet build_adjacency(const SkeletonTopology& topo, std::size_t edge_types) {
  const EdgePartition part = partition_edges(topo, edge_types);
  const std::size_t n = part.num_joints;
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (part.label(i, j) >= 0) degree[i] += 1.0;
    }
  }
  AdjacencySet set;
  set.num_joints = n;
  set.edge_types = edge_types;
  std::vector<std::vector<double>> mats(edge_types, std::vector<double>(n * n, 0.0));
  set.nonzeros.assign(edge_types, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const int l = part.label(i, j);
      if (l < 0) continue;
      mats[static_cast<std::size_t>(l)][i * n + j] = 1.0 / std::sqrt(degree[i] * degree[j]);
      ++set.nonzeros[static_cast<std::size_t>(l)];
    }
  }
  for (auto& m : mats) set.matrices.emplace_back(Shape{n, n}, std::move(m));
  return set;
}

}  // namespace gmlp
