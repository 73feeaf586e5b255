// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "gmlp/cli.hpp"
#include "gmlp/data.hpp"
#include "gmlp/metrics.hpp"
#include "gmlp/model.hpp"
#include "gmlp/train.hpp"
#include "support.hpp"

using namespace gmlp;
using nlohmann::json;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      if (!detail.empty()) detail += "; ";
      detail += "FAILED " + what;
    }
  }
  void note(const std::string& text) {
    if (!detail.empty()) detail += "; ";
    detail += text;
  }
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool within(double value, double nominal, double rel) { return std::abs(value - nominal) <= rel * nominal; }

json run_json(const std::vector<std::string>& args, int& code) {
  std::ostringstream out;
  std::ostringstream err;
  code = run_cli(args, out, err);
  return code == 0 ? json::parse(out.str()) : json();
}

Outcome parameter_counts() {
  Outcome o;
  Stopwatch clock;
  int code = 0;
  const json j = run_json({"cost", "--sweep-frames", "1,243"}, code);
  o.require(code == 0, "cost command");
  if (code != 0) return o;
  const double p1 = j["rows"][0]["parameters"].get<double>();
  const double p243 = j["rows"][1]["parameters"].get<double>();
  o.require(within(p1, 9.49e6, 0.02), "T=1 params " + fmt("%.0f", p1) + " vs 9.49M +-2%");
  o.require(within(p243, 9.73e6, 0.02), "T=243 params " + fmt("%.0f", p243) + " vs 9.73M +-2%");
  ModelConfig base;
  const std::uint64_t c = base.hidden;
  const std::uint64_t at1 = count_params(base);
  bool exact = true;
  for (std::size_t t = 1; t <= 243; ++t) {
    ModelConfig m = base;
    m.frames = t;
    exact = exact && count_params(m) - at1 == (2 * t - 2) * c;
  }
  o.require(exact, "T-delta (2T-2)*C for T=1..243");
  const double secs = clock.seconds();
  o.require(secs < 1.0, "runtime " + fmt("%.3f", secs) + " s");
  o.note("T=1 " + fmt("%.0f", p1) + ", T=243 " + fmt("%.0f", p243) + ", delta exact, " + fmt("%.3f s", secs));
  return o;
}

Outcome flop_counts() {
  Outcome o;
  Stopwatch clock;
  int code = 0;
  const json j = run_json({"cost", "--sweep-frames", "1,243"}, code);
  o.require(code == 0, "cost command");
  if (code != 0) return o;
  const double f1 = j["rows"][0]["flops"].get<double>();
  const double f243 = j["rows"][1]["flops"].get<double>();
  o.require(within(f1, 348e6, 0.05), "T=1 FLOPs " + fmt("%.0f", f1) + " vs 348M +-5%");
  o.require(within(f243, 356e6, 0.05), "T=243 FLOPs " + fmt("%.0f", f243) + " vs 356M +-5%");
  ModelConfig base;
  const std::uint64_t slope = 2 * base.joints * 2 * base.hidden;
  const AdjacencySet adj = build_adjacency(build_topology(base.layout), base.edge_types);
  const std::uint64_t at1 = count_flops(base, adj);
  bool linear = true;
  for (std::size_t t = 1; t <= 243; ++t) {
    ModelConfig m = base;
    m.frames = t;
    linear = linear && count_flops(m, adj) - at1 == (t - 1) * slope;
  }
  o.require(linear, "linear growth with slope 2*N*2*C");
  const double secs = clock.seconds();
  o.require(secs < 1.0, "runtime " + fmt("%.3f", secs) + " s");
  o.note("T=1 " + fmt("%.0f", f1) + ", T=243 " + fmt("%.0f", f243) + ", slope " + std::to_string(slope) + ", " +
         fmt("%.3f s", secs));
  return o;
}

Outcome gradient_integrity() {
  Outcome o;
  Stopwatch clock;
  const ModelConfig base = toy_model_config();
  o.require(base.joints == 5 && base.hidden == 8 && base.layers == 2, "toy scale N=5, C=8, L=2");
  double worst = 0.0;
  std::size_t combos = 0;
  for (Variant v : kAllVariants) {
    for (Placement p : kAllPlacements) {
      for (BlockToggle t : kAllToggles) {
        ModelConfig m = base;
        m.variant = v;
        m.placement = p;
        m.block_toggle = t;
        const GradCheckReport r = model_grad_check(m, 1);
        worst = std::max(worst, r.max_rel_error());
        o.require(r.passed(1e-4), std::string(to_string(v)) + "/" + std::string(to_string(p)) + "/" +
                                      std::string(to_string(t)) + " rel err " + fmt("%.3g", r.max_rel_error()));
        ++combos;
      }
    }
  }
  const double secs = clock.seconds();
  o.require(secs < 120.0, "runtime " + fmt("%.1f", secs) + " s");
  o.note(std::to_string(combos) + " combinations, max rel err " + fmt("%.3g", worst) + ", " + fmt("%.1f s", secs));
  return o;
}

Outcome reduction_identities() {
  Outcome o;
  testing::Rng rng(404);
  for (Variant v : {Variant::mlp_mixer, Variant::gcn_only}) {
    ModelConfig c;
    c.variant = v;
    c.hidden = 32;
    c.spatial_dim = 16;
    c.channel_dim = 64;
    c.seed = 11;
    const GraphMLPModel model(c);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor in = testing::random_tensor(rng, {1, 17, 2});
      const Tensor y = forward(in, model);
      const auto ref = v == Variant::mlp_mixer ? testing::reference_mlp_mixer(model, in.data())
                                               : testing::reference_gcn_only(model, in.data());
      for (std::size_t n = 0; n < 17; ++n) {
        for (std::size_t k = 0; k < 3; ++k) worst = std::max(worst, std::abs(y.at({n, k}) - ref[n][k]));
      }
    }
    o.require(worst <= 1e-12, std::string(to_string(v)) + " max diff " + fmt("%.3g", worst));
    o.note(std::string(to_string(v)) + " max diff " + fmt("%.3g", worst) + " over 100 inputs");
  }
  return o;
}

TrainConfig overfit_config() {
  TrainConfig cfg;
  cfg.model.hidden = 64;
  cfg.model.spatial_dim = 32;
  cfg.model.channel_dim = 128;
  cfg.model.seed = 1;
  cfg.seed = 1;
  cfg.epochs = 300;
  cfg.batch_size = 4;
  cfg.augment_flip = false;
  cfg.decay_per_epoch = 0.99;
  cfg.decay_per_5_epochs = 1.0;
  return cfg;
}

Outcome optimization_sanity() {
  Outcome o;
  SyntheticConfig sc;
  sc.seed = 1;
  sc.num_samples = 32;
  const auto samples = generate_synthetic(sc, build_topology("h36m_17"));
  const TrainConfig cfg = overfit_config();

  auto run = [&](std::vector<std::string>& logs) {
    GraphMLPModel model(cfg.model);
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochLog& l) { logs.push_back(l.to_json()); };
    return train(model, cfg, samples, {}, hooks);
  };
  Stopwatch clock;
  std::vector<std::string> first;
  const TrainResult r = run(first);
  const double secs = clock.seconds();
  const double final_mpjpe = r.epochs.back().train_mpjpe;
  o.require(cfg.epochs <= 500, "epoch budget");
  o.require(final_mpjpe < 0.1 * r.initial_mpjpe,
            "final " + fmt("%.2f", final_mpjpe) + " mm vs 10% of initial " + fmt("%.2f", r.initial_mpjpe));
  o.require(secs < 300.0, "runtime " + fmt("%.1f", secs) + " s");

  std::vector<std::string> second;
  run(second);
  o.require(first == second, "identical logs on rerun with the same seed");
  o.note("initial " + fmt("%.1f", r.initial_mpjpe) + " mm -> " + fmt("%.2f", final_mpjpe) + " mm after " +
         std::to_string(cfg.epochs) + " epochs, " + fmt("%.1f s", secs) + ", rerun identical");
  return o;
}

Outcome metric_properties() {
  Outcome o;
  testing::Rng rng(606);
  std::size_t pa_violations = 0;
  std::size_t search_losses = 0;
  std::size_t bound_violations = 0;
  double worst_invariance = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Pose3d target = testing::random_pose(rng, 17);
    Pose3d pred = testing::similarity(target, rng.uniform(0.5, 1.5), testing::random_rotation(rng),
                                      {rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-100, 100)});
    const double noise = rng.uniform(0.0, 200.0);
    for (auto& v : pred) {
      for (double& c : v) c += rng.normal() * noise;
    }
    const double m = mpjpe(pred, target);
    const double pa = pa_mpjpe(pred, target);
    if (pa > m + 1e-9) ++pa_violations;

    const Pose3d moved = testing::similarity(pred, rng.uniform(0.2, 5.0), testing::random_rotation(rng),
                                             {rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3)});
    worst_invariance = std::max(worst_invariance, std::abs(pa_mpjpe(moved, target) - pa));

    // Random search: each candidate gets a random rotation and scale, with
    // the translation that matches the centroids.
    const double best = testing::frobenius_sq(procrustes_align(pred, target), target);
    Vec3 pc{0, 0, 0};
    Vec3 tc{0, 0, 0};
    for (std::size_t j = 0; j < 17; ++j) {
      for (int a = 0; a < 3; ++a) {
        pc[a] += pred[j][a] / 17.0;
        tc[a] += target[j][a] / 17.0;
      }
    }
    for (int k = 0; k < 1000; ++k) {
      const double s = rng.uniform(0.3, 2.0);
      const auto rot = testing::random_rotation(rng);
      Vec3 t{};
      for (int a = 0; a < 3; ++a) t[a] = tc[a] - s * (rot[a][0] * pc[0] + rot[a][1] * pc[1] + rot[a][2] * pc[2]);
      if (testing::frobenius_sq(testing::similarity(pred, s, rot, t), target) < best - 1e-9) {
        ++search_losses;
        break;
      }
    }

    const PckAuc pk = pck_auc(std::vector<Pose3d>{pred}, std::vector<Pose3d>{target});
    if (!(0.0 <= pk.auc && pk.auc <= pk.pck_150 && pk.pck_150 <= 100.0)) ++bound_violations;
  }
  o.require(pa_violations == 0, std::to_string(pa_violations) + " pairs with pa_mpjpe > mpjpe");
  o.require(worst_invariance <= 1e-6, "similarity invariance " + fmt("%.3g", worst_invariance));
  o.require(search_losses == 0, std::to_string(search_losses) + " instances where random search won");
  o.require(bound_violations == 0, std::to_string(bound_violations) + " pck/auc bound violations");
  o.note("1000 pairs, invariance " + fmt("%.3g", worst_invariance) + " mm, Procrustes never beaten");
  return o;
}

Outcome graph_properties() {
  Outcome o;
  auto check = [&](const SkeletonTopology& topo, std::size_t k, double& worst_radius) {
    const auto c = testing::verify_adjacency(topo, k);
    worst_radius = std::max(worst_radius, c.spectral_radius);
    o.require(c.symmetric && c.disjoint && c.sums_to_normalized && c.spectral_radius <= 1.0 + 1e-9,
              "adjacency of '" + topo.name + "' k=" + std::to_string(k));
  };
  double radius = 0.0;
  for (std::size_t k = 1; k <= 4; ++k) check(build_topology("h36m_17"), k, radius);
  testing::Rng rng(707);
  for (int trial = 0; trial < 50; ++trial) check(testing::random_tree(rng, 2 + rng.index(30)), 4, radius);
  o.note("h36m_17 (k=1..4) and 50 random trees, max spectral radius " + fmt("%.12f", radius));
  return o;
}

Outcome data_properties() {
  Outcome o;
  const SkeletonTopology topo = build_topology("h36m_17");
  SyntheticConfig sc;
  sc.seed = 8;
  sc.num_samples = 50;
  std::vector<PoseSample> samples = generate_synthetic(sc, topo);
  sc.frames = 27;
  sc.num_samples = 10;
  for (auto& s : generate_synthetic(sc, topo)) samples.push_back(s);

  double worst_reproj = 0.0;
  bool involution = true;
  for (const PoseSample& s : samples) {
    const PoseSample f = horizontal_flip(s, topo);
    involution = involution && horizontal_flip(f, topo) == s;
    for (const PoseSample* p : {&s, &f}) {
      const std::size_t centre = p->frames / 2;
      for (std::size_t j = 0; j < p->joints; ++j) {
        Vec3 x;
        for (int a = 0; a < 3; ++a) x[a] = p->pose3d[3 * j + a] + p->camera->root_translation[a];
        const auto uv = project(x, p->camera->intrinsics);
        for (int a = 0; a < 2; ++a) {
          worst_reproj = std::max(worst_reproj, std::abs(uv[a] - p->pose2d[(centre * p->joints + j) * 2 + a]));
        }
      }
    }
  }
  o.require(involution, "flip involution");
  o.require(worst_reproj <= 1e-6, "reprojection error " + fmt("%.3g", worst_reproj));

  const auto jl = testing::temp_path("accept.jsonl");
  const auto bin = testing::temp_path("accept.bin");
  write_dataset(jl, samples);
  write_dataset(bin, samples);
  const auto jl_back = read_dataset(jl);
  const auto bin_back = read_dataset(bin);
  bool data_ok = jl_back.size() == samples.size() && bin_back.size() == samples.size();
  for (std::size_t i = 0; data_ok && i < samples.size(); ++i) {
    PoseSample q = quantize_f32(samples[i]);
    data_ok = jl_back[i] == q;
    q.camera.reset();
    data_ok = data_ok && bin_back[i] == q;
  }
  o.require(data_ok, "dataset round trip at f32 precision");

  ModelConfig mc;
  mc.hidden = 32;
  mc.spatial_dim = 16;
  mc.channel_dim = 64;
  mc.frames = 27;
  mc.seed = 3;
  const GraphMLPModel model(mc);
  const auto w1 = testing::temp_path("accept_a.gmlp");
  save_weights(model, w1);
  const GraphMLPModel loaded = load_weights(w1, mc);
  bool weights_ok = loaded.config() == mc;
  const auto pa = model.parameters();
  const auto pb = loaded.parameters();
  for (std::size_t i = 0; weights_ok && i < pa.size(); ++i) {
    weights_ok = pa[i].name == pb[i].name && pa[i].tensor.shape() == pb[i].tensor.shape() &&
                 std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin());
  }
  o.require(weights_ok, "weight round trip");

  // Fixed seeds: regenerate every artifact and compare bytes.
  const auto jl2 = testing::temp_path("accept2.jsonl");
  const auto bin2 = testing::temp_path("accept2.bin");
  const auto w2 = testing::temp_path("accept_b.gmlp");
  SyntheticConfig again;
  again.seed = 8;
  again.num_samples = 50;
  std::vector<PoseSample> samples2 = generate_synthetic(again, topo);
  again.frames = 27;
  again.num_samples = 10;
  for (auto& s : generate_synthetic(again, topo)) samples2.push_back(s);
  write_dataset(jl2, samples2);
  write_dataset(bin2, samples2);
  save_weights(GraphMLPModel(mc), w2);
  o.require(file_bytes(jl) == file_bytes(jl2) && file_bytes(bin) == file_bytes(bin2), "bit-identical datasets");
  o.require(file_bytes(w1) == file_bytes(w2), "bit-identical initial weights");

  TrainConfig tc;
  tc.model = toy_model_config();
  tc.epochs = 2;
  tc.batch_size = 4;
  SyntheticConfig toy;
  toy.num_samples = 8;
  const auto toy_samples = generate_synthetic(toy, build_topology("toy_5"));
  std::string trained[2];
  for (auto& bytes : trained) {
    GraphMLPModel m(tc.model);
    train(m, tc, toy_samples);
    const auto path = testing::temp_path("accept_trained.gmlp");
    save_weights(m, path);
    bytes = file_bytes(path);
  }
  o.require(trained[0] == trained[1], "bit-identical trained checkpoints");
  o.note(std::to_string(samples.size()) + " samples, reprojection " + fmt("%.3g", worst_reproj) +
         ", jsonl/bin/weights round trip, artifacts bit-identical");
  return o;
}

Outcome lr_schedule() {
  Outcome o;
  TrainConfig cfg;
  cfg.model = toy_model_config();
  cfg.epochs = 31;
  cfg.batch_size = 8;
  SyntheticConfig sc;
  sc.num_samples = 4;
  const auto samples = generate_synthetic(sc, build_topology("toy_5"));
  GraphMLPModel model(cfg.model);
  std::vector<double> logged;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& l) { logged.push_back(json::parse(l.to_json())["lr"].get<double>()); };
  train(model, cfg, samples, {}, hooks);
  o.require(logged.size() == 31, "31 logged epochs");
  std::size_t mismatches = 0;
  for (std::size_t e = 0; e < logged.size(); ++e) {
    const double expected = 0.001 * std::pow(0.95, static_cast<double>(e)) * std::ldexp(1.0, -static_cast<int>(e / 5));
    if (logged[e] != expected) ++mismatches;
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " epochs differ from the closed form");
  o.note("e=0..30 exact, lr(30) = " + fmt("%.10g", logged.empty() ? 0.0 : logged.back()));
  return o;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"parameter counts", parameter_counts},
      {"FLOP counts", flop_counts},
      {"gradient integrity", gradient_integrity},
      {"reduction identities", reduction_identities},
      {"optimization sanity", optimization_sanity},
      {"metric properties", metric_properties},
      {"graph properties", graph_properties},
      {"data and format properties", data_properties},
      {"learning-rate schedule", lr_schedule},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.passed) ++failures;
    std::printf("[%s] %zu %s: %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
