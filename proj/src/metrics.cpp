#include <cmath>

#include <nlohmann/json.hpp>

#include "gmlp/error.hpp"
#include "gmlp/metrics.hpp"

namespace gmlp {

Tensor pose_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape() || pred.shape().back() != 3 || pred.rank() < 2) {
    throw ShapeError("pose_loss: shapes " + shape_str(pred.shape()) + " and " + shape_str(target.shape()) +
                     " must be equal [..., N, 3]");
  }
  Tensor total = sum_all(row_norms(sub(pred, target)));
  const std::size_t samples = pred.numel() / (pred.dim(pred.rank() - 2) * 3);
  return samples == 1 ? total : scale(total, 1.0 / static_cast<double>(samples));
}

namespace {

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

double mpjpe(std::span<const Vec3> pred, std::span<const Vec3> target) {
  if (pred.size() != target.size()) throw ShapeError("mpjpe: joint counts differ");
  if (pred.empty()) throw ContractError("mpjpe: empty pose");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += distance(pred[i], target[i]);
  return total / static_cast<double>(pred.size());
}

std::vector<double> default_auc_thresholds() {
  std::vector<double> out;
  for (int t = 0; t <= 150; t += 5) out.push_back(static_cast<double>(t));
  return out;
}

PckAuc pck_auc_from_errors(std::span<const double> joint_errors, std::span<const double> thresholds) {
  if (joint_errors.empty()) throw ContractError("pck_auc: empty error set");
  if (thresholds.empty()) throw ContractError("pck_auc: empty threshold grid");
  auto pck_at = [&](double threshold) {
    std::size_t hits = 0;
    for (double e : joint_errors) {
      if (e < threshold || e == 0.0) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(joint_errors.size());
  };
  PckAuc out;
  out.pck_150 = pck_at(150.0);
  double sum = 0.0;
  for (double t : thresholds) sum += pck_at(t);
  out.auc = sum / static_cast<double>(thresholds.size());
  return out;
}

namespace {

void check_sets(std::span<const Pose3d> pred_set, std::span<const Pose3d> target_set) {
  if (pred_set.empty()) throw ContractError("evaluation set is empty");
  if (pred_set.size() != target_set.size()) throw ContractError("prediction and target sets differ in size");
  const std::size_t n = target_set[0].size();
  for (std::size_t s = 0; s < pred_set.size(); ++s) {
    if (pred_set[s].size() != n || target_set[s].size() != n) {
      throw ShapeError("evaluation sample " + std::to_string(s) + " has a different joint count");
    }
  }
}

std::vector<double> all_joint_errors(std::span<const Pose3d> pred_set, std::span<const Pose3d> target_set) {
  std::vector<double> errors;
  for (std::size_t s = 0; s < pred_set.size(); ++s) {
    for (std::size_t j = 0; j < pred_set[s].size(); ++j) errors.push_back(distance(pred_set[s][j], target_set[s][j]));
  }
  return errors;
}

}  // namespace

PckAuc pck_auc(std::span<const Pose3d> pred_set, std::span<const Pose3d> target_set) {
  check_sets(pred_set, target_set);
  const auto thresholds = default_auc_thresholds();
  return pck_auc_from_errors(all_joint_errors(pred_set, target_set), thresholds);
}

EvalReport evaluate(std::span<const Pose3d> pred_set, std::span<const Pose3d> target_set) {
  check_sets(pred_set, target_set);
  const std::size_t samples = pred_set.size();
  const std::size_t n = target_set[0].size();

  EvalReport r;
  r.sample_count = samples;
  r.per_joint_errors.assign(n, 0.0);
  double pa_total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t j = 0; j < n; ++j) r.per_joint_errors[j] += distance(pred_set[s][j], target_set[s][j]);
    pa_total += pa_mpjpe(pred_set[s], target_set[s]);
  }
  double total = 0.0;
  for (double& e : r.per_joint_errors) {
    total += e;
    e /= static_cast<double>(samples);
  }
  r.mpjpe = total / static_cast<double>(samples * n);
  r.pa_mpjpe = pa_total / static_cast<double>(samples);
  const PckAuc pa = pck_auc(pred_set, target_set);
  r.pck_150 = pa.pck_150;
  r.auc = pa.auc;
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["mpjpe"] = mpjpe;
  j["pa_mpjpe"] = pa_mpjpe;
  j["pck_150"] = pck_150;
  j["auc"] = auc;
  j["per_joint_errors"] = per_joint_errors;
  j["sample_count"] = sample_count;
  return j.dump();
}

}  // namespace gmlp
