#include "gmlp/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gmlp/config_file.hpp"
#include "gmlp/data.hpp"
#include "gmlp/error.hpp"
#include "gmlp/metrics.hpp"
#include "gmlp/train.hpp"

namespace gmlp {

namespace {

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
  return {{"layers", c.layers},
          {"hidden", c.hidden},
          {"spatial_dim", c.spatial_dim},
          {"channel_dim", c.channel_dim},
          {"joints", c.joints},
          {"frames", c.frames},
          {"edge_types", c.edge_types},
          {"variant", std::string(to_string(c.variant))},
          {"placement", std::string(to_string(c.placement))},
          {"block_toggle", std::string(to_string(c.block_toggle))},
          {"video_ln", c.video_ln},
          {"seed", c.seed},
          {"ln_eps", c.ln_eps},
          {"output_scale", c.output_scale},
          {"layout", c.layout}};
}

// Flags shared by the subcommands; each one that was given overrides the config file.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> frames;
  std::optional<std::string> variant;
  std::optional<std::string> placement;
  std::optional<std::string> block_toggle;
  std::optional<std::string> format;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> samples;
  std::optional<std::string> layout;
  std::optional<std::string> train_data;
  std::optional<std::string> dataset;
  std::optional<std::string> checkpoint;
  std::optional<std::string> output;
  std::string sweep_frames;
};

void add_config(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Flat key = value configuration file");
}
void add_seed(CLI::App* cmd, Flags& f) { cmd->add_option("--seed", f.seed, "Seed for initialisation, shuffling and data"); }
void add_frames(CLI::App* cmd, Flags& f) { cmd->add_option("--frames", f.frames, "Input frames T"); }
void add_model_shape(CLI::App* cmd, Flags& f) {
  cmd->add_option("--variant", f.variant, "graphmlp | mlp_mixer | gcn_only | graph_mixer");
  cmd->add_option("--placement", f.placement,
                  "parallel | before_spatial | after_spatial | after_channel | parallel_spatial_gcn");
  cmd->add_option("--block-toggle", f.block_toggle, "both | sg_only | cg_only");
}

RunConfig resolve(RunConfig base, const Flags& f) {
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw IoError("cannot open config file " + f.config);
    std::stringstream ss;
    ss << in.rdbuf();
    for (const auto& [k, v] : parse_key_values(ss.str())) apply_setting(base, k, v);
  }
  auto set = [&](const char* key, const auto& value) {
    if (!value) return;
    std::ostringstream os;
    os << *value;
    apply_setting(base, key, os.str());
  };
  set("seed", f.seed);
  set("frames", f.frames);
  set("variant", f.variant);
  set("placement", f.placement);
  set("block_toggle", f.block_toggle);
  set("format", f.format);
  set("epochs", f.epochs);
  set("num_samples", f.samples);
  set("layout", f.layout);
  set("train_data", f.train_data);
  set("eval_data", f.dataset);
  set("checkpoint", f.checkpoint);
  set("output", f.output);
  return base;
}

std::vector<std::size_t> parse_frame_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v == 0) {
      throw ValidationError("--sweep-frames: '" + item + "' is not a positive integer");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ValidationError("--sweep-frames: empty list");
  return out;
}

json cost_row(const ModelConfig& config) {
  const CostReport r = cost_report(config);
  return {{"frames", config.frames},
          {"parameters", r.parameter_count},
          {"parameters_m", static_cast<double>(r.parameter_count) / 1e6},
          {"flops", r.flops},
          {"flops_m", static_cast<double>(r.flops) / 1e6},
          {"elementwise_flops", r.elementwise_flops}};
}

int cmd_cost(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(RunConfig{}, f);
  json j;
  j["convention"] = "one multiply-accumulate = 2 FLOPs, batch 1, forward pass";
  j["config"] = config_to_json(cfg.train.model);
  if (f.sweep_frames.empty()) {
    j["cost"] = cost_row(cfg.train.model);
  } else {
    json rows = json::array();
    for (std::size_t t : parse_frame_list(f.sweep_frames)) {
      ModelConfig m = cfg.train.model;
      m.frames = t;
      rows.push_back(cost_row(m));
    }
    j["rows"] = rows;
  }
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_gradcheck(const Flags& f, std::ostream& out) {
  RunConfig base;
  base.train.model = toy_model_config();
  const RunConfig cfg = resolve(base, f);
  constexpr double kTolerance = 1e-4;

  std::vector<Variant> variants(std::begin(kAllVariants), std::end(kAllVariants));
  std::vector<Placement> placements(std::begin(kAllPlacements), std::end(kAllPlacements));
  std::vector<BlockToggle> toggles(std::begin(kAllToggles), std::end(kAllToggles));
  if (f.variant) variants = {cfg.train.model.variant};
  if (f.placement) placements = {cfg.train.model.placement};
  if (f.block_toggle) toggles = {cfg.train.model.block_toggle};

  json combos = json::array();
  bool all_passed = true;
  double worst = 0.0;
  for (Variant v : variants) {
    for (Placement p : placements) {
      for (BlockToggle t : toggles) {
        ModelConfig m = cfg.train.model;
        m.variant = v;
        m.placement = p;
        m.block_toggle = t;
        const GradCheckReport report = model_grad_check(m, cfg.train.seed, cfg.gradcheck_batch);
        const auto it = std::max_element(report.params.begin(), report.params.end(),
                                         [](const auto& a, const auto& b) { return a.max_rel_error < b.max_rel_error; });
        const bool passed = report.passed(kTolerance);
        all_passed = all_passed && passed;
        worst = std::max(worst, report.max_rel_error());
        combos.push_back({{"variant", std::string(to_string(v))},
                          {"placement", std::string(to_string(p))},
                          {"block_toggle", std::string(to_string(t))},
                          {"parameters", report.params.size()},
                          {"max_rel_error", report.max_rel_error()},
                          {"worst_parameter", it == report.params.end() ? std::string() : it->name},
                          {"passed", passed}});
      }
    }
  }
  json j{{"passed", all_passed},
         {"tolerance", kTolerance},
         {"max_rel_error", worst},
         {"config", config_to_json(cfg.train.model)},
         {"combinations", combos}};
  out << j.dump(2) << '\n';
  return all_passed ? 0 : 1;
}

int cmd_synth(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(RunConfig{}, f);
  const SkeletonTopology topo = build_topology(cfg.train.model.layout);
  const std::vector<PoseSample> samples = generate_synthetic(cfg.synth, topo);
  const DatasetFormat format = cfg.format.value_or(format_for_path(cfg.output));
  write_dataset(cfg.output, samples, format);
  json j{{"output", cfg.output.string()},
         {"format", format == DatasetFormat::jsonl ? "jsonl" : "bin"},
         {"samples", samples.size()},
         {"frames", cfg.synth.frames},
         {"joints", topo.num_joints()},
         {"layout", topo.name},
         {"seed", cfg.synth.seed}};
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_train(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(RunConfig{}, f);
  run_training(cfg.train, out);
  return 0;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(RunConfig{}, f);
  if (cfg.train.eval_data.empty()) throw ValidationError("eval: no dataset given (--dataset or eval_data)");
  const GraphMLPModel model =
      cfg.model_keys_set ? load_weights(cfg.train.checkpoint, cfg.train.model) : load_weights(cfg.train.checkpoint);
  const std::vector<PoseSample> samples = read_dataset(cfg.train.eval_data);
  const EvalReport report = evaluate_model(model, samples, cfg.train.batch_size);
  out << report.to_json() << '\n';
  return 0;
}

}  // namespace

std::string model_config_json(const ModelConfig& config) { return config_to_json(config).dump(); }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GraphMLP 2D-to-3D pose lifting: training, evaluation, cost accounting and checks", "graphmlp"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* train = app.add_subcommand("train", "Train a model and write checkpoints; JSON log lines on stdout");
  add_config(train, f);
  add_seed(train, f);
  add_frames(train, f);
  add_model_shape(train, f);
  train->add_option("--epochs", f.epochs, "Number of epochs");
  train->add_option("--train-data", f.train_data, "Training dataset (.jsonl or .bin)");
  train->add_option("--eval-data", f.dataset, "Optional held-out dataset");
  train->add_option("--checkpoint", f.checkpoint, "Final checkpoint path");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset; prints the report as JSON");
  add_config(eval, f);
  eval->add_option("--checkpoint", f.checkpoint, "Weight file");
  eval->add_option("--dataset", f.dataset, "Dataset (.jsonl or .bin)");

  CLI::App* cost = app.add_subcommand("cost", "Report parameter count and FLOPs");
  add_config(cost, f);
  add_frames(cost, f);
  add_model_shape(cost, f);
  cost->add_option("--sweep-frames", f.sweep_frames, "Comma-separated frame counts, one row each");

  CLI::App* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check at toy scale");
  add_config(grad, f);
  add_seed(grad, f);
  add_frames(grad, f);
  add_model_shape(grad, f);

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_config(synth, f);
  add_seed(synth, f);
  add_frames(synth, f);
  synth->add_option("--samples", f.samples, "Number of samples");
  synth->add_option("--layout", f.layout, "Skeleton layout name or JSON file");
  synth->add_option("--format", f.format, "jsonl | bin (default from the output extension)");
  synth->add_option("--output", f.output, "Destination file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(f, out);
    if (*eval) return cmd_eval(f, out);
    if (*cost) return cmd_cost(f, out);
    if (*grad) return cmd_gradcheck(f, out);
    if (*synth) return cmd_synth(f, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace gmlp
