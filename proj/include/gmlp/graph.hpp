#pragma once

// Human-skeleton graph: topology, edge-type partition and the per-type
// symmetrically normalised adjacency matrices consumed by GCN blocks.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gmlp/tensor.hpp"

namespace gmlp {

struct SkeletonTopology {
  std::string name;
  std::vector<std::string> joint_names;
  /// parent[i] == i marks the root.
  std::vector<std::size_t> parent;
  /// (left, right) joint pairs.
  std::vector<std::pair<std::size_t, std::size_t>> symmetry_pairs;

  std::size_t num_joints() const { return parent.size(); }
  std::size_t root() const;
  /// (child, parent) for every non-root joint, in joint order.
  std::vector<std::pair<std::size_t, std::size_t>> bones() const;
  /// Tree depth of each joint; the root has depth 0.
  std::vector<std::size_t> depths() const;
};

/// Throws ValidationError on multiple/no roots, cycles, out-of-range indices,
/// or overlapping symmetry pairs.
void validate_topology(const SkeletonTopology& topo);

/// Registered layout names ("h36m_17", "toy_5") or a path to a layout JSON file.
SkeletonTopology build_topology(std::string_view layout);
std::vector<std::string> registered_layouts();
SkeletonTopology parse_layout_json(std::string_view text, std::string name = "custom");
SkeletonTopology load_layout_file(const std::filesystem::path& path);
std::string layout_to_json(const SkeletonTopology& topo);

/// Connection classes of the augmented adjacency A + I. Bones are split by
/// the depth parity of their child joint, so at every joint the bone to its
/// parent and the bones to its children land in different classes.
enum class EdgeType : int {
  self_loop = 0,
  bone_odd_child = 1,
  bone_even_child = 2,
  symmetric = 3,
};

inline constexpr std::size_t kMaxEdgeTypes = 4;

struct EdgePartition {
  std::size_t num_joints = 0;
  std::size_t edge_types = 0;
  /// Row-major N x N; -1 where A + I is zero, otherwise the kernel index.
  std::vector<int> labels;

  int label(std::size_t i, std::size_t j) const { return labels[i * num_joints + j]; }
  std::size_t support(std::size_t type) const;
};

/// Kernel index for an edge class when only `edge_types` kernels exist:
/// 4 keeps every class, 3 merges both bone classes, 2 keeps self loops apart
/// from all neighbours, 1 merges everything.
std::size_t kernel_index(EdgeType type, std::size_t edge_types);

EdgePartition partition_edges(const SkeletonTopology& topo, std::size_t edge_types = kMaxEdgeTypes);

struct AdjacencySet {
  std::size_t num_joints = 0;
  std::size_t edge_types = 0;
  /// One N x N normalised matrix per edge type, disjoint supports.
  std::vector<Tensor> matrices;
  std::vector<std::size_t> nonzeros;

  /// Sum over all types, i.e. D^-1/2 (A + I) D^-1/2.
  Tensor normalized_union() const;
  std::size_t total_nonzeros() const;
};

/// Degrees come from the full A + I, so the per-type matrices sum exactly to
/// the single-matrix normalisation.
AdjacencySet build_adjacency(const SkeletonTopology& topo, std::size_t edge_types = kMaxEdgeTypes);

}  // namespace gmlp
