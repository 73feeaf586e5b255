#pragma once

// Training loss and evaluation metrics for 3D pose: MPJPE, Procrustes-aligned
// PA-MPJPE, PCK at 150 mm and the AUC over a fixed threshold grid.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gmlp/tensor.hpp"

namespace gmlp {

using Vec3 = std::array<double, 3>;
using Pose3d = std::vector<Vec3>;

/// Sum over joints of the (unsquared) Euclidean distance. Accepts [N, 3] or a
/// batch [B, N, 3]; a batch is averaged over samples.
Tensor pose_loss(const Tensor& pred, const Tensor& target);

/// Mean per-joint Euclidean distance, in the units of the inputs.
double mpjpe(std::span<const Vec3> pred, std::span<const Vec3> target);

/// Optimal similarity transform s * R * p + t of `pred` onto `target`
/// (det R = +1). Throws AlignmentError when the centred target has rank < 2.
Pose3d procrustes_align(std::span<const Vec3> pred, std::span<const Vec3> target);
double pa_mpjpe(std::span<const Vec3> pred, std::span<const Vec3> target);

/// Singular value decomposition of a 3x3 matrix by one-sided Jacobi rotations:
/// a = u * diag(s) * v^T, singular values in descending order.
struct Svd3 {
  std::array<std::array<double, 3>, 3> u{};
  std::array<double, 3> s{};
  std::array<std::array<double, 3>, 3> v{};
  int sweeps = 0;
};
Svd3 svd3(const std::array<std::array<double, 3>, 3>& a, double tolerance = 1e-12, int max_sweeps = 60);

/// Thresholds 0, 5, ..., 150 mm.
std::vector<double> default_auc_thresholds();

struct PckAuc {
  double pck_150 = 0.0;  // percent of joints with error < 150 mm
  double auc = 0.0;      // mean PCK over the threshold grid, percent
};

/// Per-joint aggregation over all samples. A joint counts as correct at
/// threshold t when its error is strictly below t; an exact joint (error 0)
/// counts at every threshold, including t = 0.
PckAuc pck_auc(std::span<const Pose3d> pred_set, std::span<const Pose3d> target_set);
PckAuc pck_auc_from_errors(std::span<const double> joint_errors, std::span<const double> thresholds);

struct EvalReport {
  double mpjpe = 0.0;
  double pa_mpjpe = 0.0;
  double pck_150 = 0.0;
  double auc = 0.0;
  std::vector<double> per_joint_errors;
  std::size_t sample_count = 0;

  std::string to_json() const;
};

/// Throws ContractError on an empty or mismatched set.
EvalReport evaluate(std::span<const Pose3d> pred_set, std::span<const Pose3d> target_set);

}  // namespace gmlp
