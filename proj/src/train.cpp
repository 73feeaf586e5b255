#include "gmlp/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "gmlp/error.hpp"
#include "random.hpp"

namespace gmlp {

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (!(lr_init > 0.0)) throw ValidationError("train: lr must be > 0");
  if (!(decay_per_epoch > 0.0 && decay_per_epoch <= 1.0) || !(decay_per_5_epochs > 0.0 && decay_per_5_epochs <= 1.0)) {
    throw ValidationError("train: decay factors must lie in (0, 1]");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw ValidationError("train: adam betas must lie in [0, 1) and eps must be > 0");
  }
}

std::filesystem::path TrainConfig::best_checkpoint_path() const {
  if (!best_checkpoint.empty()) return best_checkpoint;
  std::filesystem::path p = checkpoint;
  const std::string ext = p.extension().string();
  p.replace_filename(p.stem().string() + ".best" + ext);
  return p;
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.lr_init * std::pow(cfg.decay_per_epoch, static_cast<double>(epoch)) *
         std::pow(cfg.decay_per_5_epochs, static_cast<double>(epoch / 5));
}

void check_compatible(const ModelConfig& config, const std::vector<PoseSample>& samples) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const PoseSample& s = samples[i];
    s.validate();
    if (s.joints != config.joints) {
      throw ValidationError("sample " + std::to_string(i) + " ('" + s.id + "') has " + std::to_string(s.joints) +
                            " joints, model expects " + std::to_string(config.joints));
    }
    if (s.frames != config.frames) {
      throw ValidationError("sample " + std::to_string(i) + " ('" + s.id + "') has " + std::to_string(s.frames) +
                            " frames, model expects " + std::to_string(config.frames));
    }
  }
}

Batch make_batch(const std::vector<PoseSample>& samples, std::span<const std::size_t> indices, bool flip,
                 const SkeletonTopology& topo) {
  if (indices.empty()) throw ContractError("make_batch: no samples selected");
  const PoseSample& first = samples.at(indices[0]);
  const std::size_t t = first.frames, n = first.joints;
  const std::size_t b = indices.size() * (flip ? 2 : 1);
  std::vector<double> in, out;
  in.reserve(b * t * n * 2);
  out.reserve(b * n * 3);
  auto append = [&](const PoseSample& s) {
    if (s.frames != t || s.joints != n) throw ShapeError("make_batch: samples differ in frames or joints");
    in.insert(in.end(), s.pose2d.begin(), s.pose2d.end());
    out.insert(out.end(), s.pose3d.begin(), s.pose3d.end());
  };
  for (std::size_t i : indices) append(samples.at(i));
  if (flip) {
    for (std::size_t i : indices) append(horizontal_flip(samples.at(i), topo));
  }
  return {Tensor({b, t, n, 2}, std::move(in)), Tensor({b, n, 3}, std::move(out))};
}

Adam::Adam(std::vector<NamedTensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const NamedTensor& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Tensor& p = params_[i].tensor;
    const auto g = p.grad();
    if (g.empty()) continue;
    auto w = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

std::string EpochLog::to_json() const {
  nlohmann::json j;
  j["event"] = "epoch";
  j["epoch"] = epoch;
  j["lr"] = lr;
  j["train_loss"] = train_loss;
  j["train_mpjpe"] = train_mpjpe;
  if (eval_mpjpe) j["eval_mpjpe"] = *eval_mpjpe;
  j["best"] = best;
  return j.dump();
}

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

[[noreturn]] void report_non_finite_forward(const std::vector<NamedTensor>& params, const Batch& batch, std::size_t epoch) {
  const std::string prefix = "non-finite loss at epoch " + std::to_string(epoch) + ": ";
  for (const NamedTensor& p : params) {
    if (!all_finite(p.tensor.data())) throw TrainingError(prefix + "parameter '" + p.name + "' is not finite");
  }
  if (!all_finite(batch.input.data())) throw TrainingError(prefix + "batch input is not finite");
  if (!all_finite(batch.target.data())) throw TrainingError(prefix + "batch target is not finite");
  const auto& entries = Tape::current().entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!all_finite(entries[i].output.data())) {
      throw TrainingError(prefix + "intermediate tensor #" + std::to_string(i) + " of shape " +
                          shape_str(entries[i].output.shape()) + " is the first non-finite value");
    }
  }
  throw TrainingError(prefix + "loss is not finite");
}

void check_gradients(const std::vector<NamedTensor>& params, std::size_t epoch) {
  for (const NamedTensor& p : params) {
    if (!all_finite(p.tensor.grad())) {
      throw TrainingError("non-finite gradient at epoch " + std::to_string(epoch) + ": gradient of '" + p.name + "'");
    }
  }
}

Pose3d to_pose(std::span<const double> v) {
  Pose3d out(v.size() / 3);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = {v[3 * j], v[3 * j + 1], v[3 * j + 2]};
  return out;
}

double mean_mpjpe(const std::vector<Pose3d>& pred, const std::vector<Pose3d>& target) {
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += mpjpe(pred[i], target[i]);
  return total / static_cast<double>(pred.size());
}

}  // namespace

std::vector<Pose3d> targets_of(const std::vector<PoseSample>& samples) {
  std::vector<Pose3d> out;
  out.reserve(samples.size());
  for (const PoseSample& s : samples) out.push_back(s.target());
  return out;
}

std::vector<Pose3d> predict(const GraphMLPModel& model, const std::vector<PoseSample>& samples, std::size_t batch_size) {
  check_compatible(model.config(), samples);
  NoGradGuard no_grad;
  std::vector<Pose3d> out;
  out.reserve(samples.size());
  std::vector<std::size_t> idx;
  const std::size_t per = model.config().joints * 3;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(samples.size(), start + batch_size); ++i) idx.push_back(i);
    const Batch b = make_batch(samples, idx, false, model.topology());
    const Tensor y = forward(b.input, model);
    const double s = model.config().output_scale;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      Pose3d p = to_pose(y.data().subspan(i * per, per));
      for (Vec3& v : p) {
        for (double& c : v) c *= s;
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

EvalReport evaluate_model(const GraphMLPModel& model, const std::vector<PoseSample>& samples, std::size_t batch_size) {
  if (samples.empty()) throw ContractError("evaluation set is empty");
  return evaluate(predict(model, samples, batch_size), targets_of(samples));
}

TrainResult train(GraphMLPModel& model, const TrainConfig& cfg, const std::vector<PoseSample>& train_set,
                  const std::vector<PoseSample>& eval_set, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty()) throw ContractError("training set is empty");
  check_compatible(model.config(), train_set);
  check_compatible(model.config(), eval_set);

  const std::vector<NamedTensor> params = model.parameters();
  Adam adam(params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  const std::vector<Pose3d> train_targets = targets_of(train_set);
  const std::vector<Pose3d> eval_targets = targets_of(eval_set);
  const double out_scale = model.config().output_scale;

  TrainResult result;
  result.initial_mpjpe = mean_mpjpe(predict(model, train_set), train_targets);
  if (hooks.on_start) hooks.on_start(result.initial_mpjpe);
  spdlog::info("initial train MPJPE {:.3f} mm", result.initial_mpjpe);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  detail::Uniform rng(cfg.seed);
  double best = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      Tape::current().reset();
      model.zero_grad();
      const Batch batch = make_batch(train_set, idx, cfg.augment_flip, model.topology());
      const Tensor loss = pose_loss(scale(forward(batch.input, model), out_scale), batch.target);
      if (!std::isfinite(loss.item())) report_non_finite_forward(params, batch, epoch);
      backward(loss);
      check_gradients(params, epoch);
      adam.step(lr);
      const std::size_t b = batch.input.dim(0);
      loss_sum += loss.item() * static_cast<double>(b);
      loss_count += b;
    }
    Tape::current().reset();

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.train_loss = loss_sum / static_cast<double>(loss_count);
    log.train_mpjpe = mean_mpjpe(predict(model, train_set), train_targets);
    if (!eval_set.empty()) log.eval_mpjpe = mean_mpjpe(predict(model, eval_set), eval_targets);
    const double monitored = log.eval_mpjpe.value_or(log.train_mpjpe);
    if (monitored < best) {
      best = monitored;
      log.best = true;
      result.best_epoch = epoch;
      result.best_mpjpe = monitored;
      if (hooks.on_best) hooks.on_best(model, log);
    }
    spdlog::debug("epoch {} lr {:.6g} loss {:.4f} train MPJPE {:.3f}", epoch, lr, log.train_loss, log.train_mpjpe);
    if (hooks.on_epoch) hooks.on_epoch(log);
    result.epochs.push_back(log);
  }
  return result;
}

TrainResult run_training(const TrainConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.train_data.empty()) throw ValidationError("train: no training dataset given (train_data)");
  const std::vector<PoseSample> train_set = read_dataset(cfg.train_data);
  const std::vector<PoseSample> eval_set = cfg.eval_data.empty() ? std::vector<PoseSample>{} : read_dataset(cfg.eval_data);
  GraphMLPModel model(cfg.model);
  spdlog::info("training {} parameters on {} samples", model.parameter_count(), train_set.size());

  TrainHooks hooks;
  hooks.on_start = [&](double initial) {
    nlohmann::json j{{"event", "start"},
                     {"initial_mpjpe", initial},
                     {"parameters", model.parameter_count()},
                     {"train_samples", train_set.size()},
                     {"eval_samples", eval_set.size()}};
    log << j.dump() << '\n' << std::flush;
  };
  hooks.on_epoch = [&](const EpochLog& e) { log << e.to_json() << '\n' << std::flush; };
  const auto best_path = cfg.best_checkpoint_path();
  hooks.on_best = [&](const GraphMLPModel& m, const EpochLog&) { save_weights(m, best_path); };

  TrainResult result = train(model, cfg, train_set, eval_set, hooks);
  save_weights(model, cfg.checkpoint);
  nlohmann::json done{{"event", "done"},
                      {"initial_mpjpe", result.initial_mpjpe},
                      {"final_mpjpe", result.epochs.back().train_mpjpe},
                      {"best_epoch", result.best_epoch},
                      {"best_mpjpe", result.best_mpjpe},
                      {"checkpoint", cfg.checkpoint.string()},
                      {"best_checkpoint", best_path.string()}};
  log << done.dump() << '\n' << std::flush;
  return result;
}

ModelConfig toy_model_config() {
  ModelConfig c;
  c.layers = 2;
  c.hidden = 8;
  c.spatial_dim = 4;
  c.channel_dim = 16;
  c.joints = 5;
  c.layout = "toy_5";
  c.output_scale = 1.0;
  return c;
}

GradCheckReport model_grad_check(const ModelConfig& config, std::uint64_t seed, std::size_t batch) {
  config.validate();
  if (config.joints > kGradCheckMaxJoints || config.hidden > kGradCheckMaxHidden) {
    throw ValidationError("gradient check is limited to N <= " + std::to_string(kGradCheckMaxJoints) + " and C <= " +
                          std::to_string(kGradCheckMaxHidden) + " (got N = " + std::to_string(config.joints) +
                          ", C = " + std::to_string(config.hidden) + ")");
  }
  if (batch == 0) throw ValidationError("gradient check batch must be >= 1");
  GraphMLPModel model(config);
  detail::Uniform rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<double> in(batch * config.frames * config.joints * 2);
  std::vector<double> out(batch * config.joints * 3);
  for (double& v : in) v = rng(-1.0, 1.0);
  for (double& v : out) v = rng(-1.0, 1.0) * config.output_scale;
  const Tensor input({batch, config.frames, config.joints, 2}, std::move(in));
  const Tensor target({batch, config.joints, 3}, std::move(out));
  const auto params = model.parameters();
  return grad_check([&] { return pose_loss(scale(forward(input, model), config.output_scale), target); }, params);
}

}  // namespace gmlp
