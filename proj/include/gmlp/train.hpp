#pragma once

// Adam training loop with the stepwise learning-rate schedule, flip-doubled
// batches, per-epoch logging and checkpointing, plus batched prediction.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gmlp/data.hpp"
#include "gmlp/metrics.hpp"
#include "gmlp/model.hpp"

namespace gmlp {

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 30;
  std::size_t batch_size = 256;
  double lr_init = 0.001;
  double decay_per_epoch = 0.95;
  double decay_per_5_epochs = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool augment_flip = true;
  /// Shuffling seed; the model initialisation uses model.seed.
  std::uint64_t seed = 0;
  std::filesystem::path train_data;
  std::filesystem::path eval_data;
  std::filesystem::path checkpoint = "graphmlp.gmlp";
  /// Empty: derived from `checkpoint` as <stem>.best<ext>.
  std::filesystem::path best_checkpoint;

  void validate() const;
  std::filesystem::path best_checkpoint_path() const;
};

/// lr_init * decay_per_epoch^e * decay_per_5_epochs^floor(e / 5).
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

struct Batch {
  Tensor input;   // [B, T, N, 2]
  Tensor target;  // [B, N, 3], millimetres
};

/// Stacks the indexed samples; with `flip` the flipped copies follow the
/// originals in the same order, doubling B.
Batch make_batch(const std::vector<PoseSample>& samples, std::span<const std::size_t> indices, bool flip,
                 const SkeletonTopology& topo);

/// Throws ValidationError when a sample's frame or joint count differs from the model.
void check_compatible(const ModelConfig& config, const std::vector<PoseSample>& samples);

class Adam {
 public:
  Adam(std::vector<NamedTensor> params, double beta1, double beta2, double eps);
  void step(double lr);
  std::uint64_t steps() const { return t_; }

 private:
  std::vector<NamedTensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double beta1_;
  double beta2_;
  double eps_;
  std::uint64_t t_ = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;   // mean per-sample loss over the epoch's batches, mm
  double train_mpjpe = 0.0;  // full training set after the epoch, mm
  std::optional<double> eval_mpjpe;
  bool best = false;

  std::string to_json() const;
};

struct TrainResult {
  double initial_mpjpe = 0.0;  // training set before the first update
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_mpjpe = 0.0;
};

struct TrainHooks {
  std::function<void(double initial_mpjpe)> on_start;
  std::function<void(const EpochLog&)> on_epoch;
  /// Called whenever the monitored MPJPE improves (eval set if present, else train).
  std::function<void(const GraphMLPModel&, const EpochLog&)> on_best;
};

/// Trains in place. Throws TrainingError naming the first non-finite tensor
/// when the loss or a gradient stops being finite.
TrainResult train(GraphMLPModel& model, const TrainConfig& cfg, const std::vector<PoseSample>& train_set,
                  const std::vector<PoseSample>& eval_set = {}, const TrainHooks& hooks = {});

/// Reads the datasets named in `cfg`, trains a fresh model, writes the final
/// and best checkpoints and streams one JSON log record per line to `log`.
TrainResult run_training(const TrainConfig& cfg, std::ostream& log);

/// Predictions in millimetres, without recording gradients.
std::vector<Pose3d> predict(const GraphMLPModel& model, const std::vector<PoseSample>& samples,
                            std::size_t batch_size = 256);
EvalReport evaluate_model(const GraphMLPModel& model, const std::vector<PoseSample>& samples,
                          std::size_t batch_size = 256);
std::vector<Pose3d> targets_of(const std::vector<PoseSample>& samples);

/// Largest joint count and width accepted by model_grad_check.
inline constexpr std::size_t kGradCheckMaxJoints = 8;
inline constexpr std::size_t kGradCheckMaxHidden = 16;

/// Toy configuration used by gradient checks: toy_5 layout, C = 8, L = 2.
ModelConfig toy_model_config();

/// Finite-difference check of the pose loss with respect to every model
/// parameter on `batch` random samples drawn from `seed`.
GradCheckReport model_grad_check(const ModelConfig& config, std::uint64_t seed, std::size_t batch = 2);

}  // namespace gmlp
