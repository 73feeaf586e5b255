#include "gmlp/config_file.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "gmlp/error.hpp"

namespace gmlp {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string bad_value(std::string_view key, std::string_view value, const char* expected) {
  return "config key '" + std::string(key) + "': '" + std::string(value) + "' is not " + expected;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ValidationError(bad_value(key, v, "a non-negative integer"));
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) { return static_cast<std::size_t>(to_u64(key, v)); }

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ValidationError(bad_value(key, v, "a number"));
  }
  if (used != s.size()) throw ValidationError(bad_value(key, v, "a number"));
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError(bad_value(key, v, "a boolean"));
}

std::vector<double> to_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = std::min(v.find(',', start), v.size());
    out.push_back(to_double(key, trim(v.substr(start, comma - start))));
    start = comma + 1;
  }
  return out;
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto model = [&t](const char* name, std::function<void(ModelConfig&, std::string_view, std::string_view)> f) {
      t[name] = [f](RunConfig& c, std::string_view k, std::string_view v) {
        f(c.train.model, k, v);
        c.model_keys_set = true;
      };
    };
    model("layers", [](ModelConfig& m, auto k, auto v) { m.layers = to_size(k, v); });
    model("hidden", [](ModelConfig& m, auto k, auto v) { m.hidden = to_size(k, v); });
    model("spatial_dim", [](ModelConfig& m, auto k, auto v) { m.spatial_dim = to_size(k, v); });
    model("channel_dim", [](ModelConfig& m, auto k, auto v) { m.channel_dim = to_size(k, v); });
    model("joints", [](ModelConfig& m, auto k, auto v) { m.joints = to_size(k, v); });
    model("edge_types", [](ModelConfig& m, auto k, auto v) { m.edge_types = to_size(k, v); });
    model("variant", [](ModelConfig& m, auto, auto v) { m.variant = parse_variant(v); });
    model("placement", [](ModelConfig& m, auto, auto v) { m.placement = parse_placement(v); });
    model("block_toggle", [](ModelConfig& m, auto, auto v) { m.block_toggle = parse_block_toggle(v); });
    model("video_ln", [](ModelConfig& m, auto k, auto v) { m.video_ln = to_bool(k, v); });
    model("ln_eps", [](ModelConfig& m, auto k, auto v) { m.ln_eps = to_double(k, v); });
    model("output_scale", [](ModelConfig& m, auto k, auto v) { m.output_scale = to_double(k, v); });
    model("layout", [](ModelConfig& m, auto, auto v) { m.layout = std::string(v); });
    // Frame count applies to both the model and generated data.
    t["frames"] = [](RunConfig& c, std::string_view k, std::string_view v) {
      c.train.model.frames = c.synth.frames = to_size(k, v);
      c.model_keys_set = true;
    };
    t["seed"] = [](RunConfig& c, std::string_view k, std::string_view v) {
      c.train.model.seed = c.train.seed = c.synth.seed = to_u64(k, v);
    };
    t["model_seed"] = [](RunConfig& c, auto k, auto v) { c.train.model.seed = to_u64(k, v); };
    t["shuffle_seed"] = [](RunConfig& c, auto k, auto v) { c.train.seed = to_u64(k, v); };

    t["epochs"] = [](RunConfig& c, auto k, auto v) { c.train.epochs = to_size(k, v); };
    t["batch_size"] = [](RunConfig& c, auto k, auto v) { c.train.batch_size = to_size(k, v); };
    t["lr"] = [](RunConfig& c, auto k, auto v) { c.train.lr_init = to_double(k, v); };
    t["decay_per_epoch"] = [](RunConfig& c, auto k, auto v) { c.train.decay_per_epoch = to_double(k, v); };
    t["decay_per_5_epochs"] = [](RunConfig& c, auto k, auto v) { c.train.decay_per_5_epochs = to_double(k, v); };
    t["adam_beta1"] = [](RunConfig& c, auto k, auto v) { c.train.adam_beta1 = to_double(k, v); };
    t["adam_beta2"] = [](RunConfig& c, auto k, auto v) { c.train.adam_beta2 = to_double(k, v); };
    t["adam_eps"] = [](RunConfig& c, auto k, auto v) { c.train.adam_eps = to_double(k, v); };
    t["augment_flip"] = [](RunConfig& c, auto k, auto v) { c.train.augment_flip = to_bool(k, v); };
    t["train_data"] = [](RunConfig& c, auto, auto v) { c.train.train_data = std::string(v); };
    t["eval_data"] = [](RunConfig& c, auto, auto v) { c.train.eval_data = std::string(v); };
    t["checkpoint"] = [](RunConfig& c, auto, auto v) { c.train.checkpoint = std::string(v); };
    t["best_checkpoint"] = [](RunConfig& c, auto, auto v) { c.train.best_checkpoint = std::string(v); };

    t["num_samples"] = [](RunConfig& c, auto k, auto v) { c.synth.num_samples = to_size(k, v); };
    t["bone_lengths"] = [](RunConfig& c, auto k, auto v) { c.synth.bone_lengths = to_list(k, v); };
    t["max_bend"] = [](RunConfig& c, auto k, auto v) { c.synth.max_bend = to_double(k, v); };
    t["walk_step"] = [](RunConfig& c, auto k, auto v) { c.synth.walk_step = to_double(k, v); };
    t["max_yaw"] = [](RunConfig& c, auto k, auto v) { c.synth.max_yaw = to_double(k, v); };
    t["focal"] = [](RunConfig& c, auto k, auto v) { c.synth.camera.focal = to_double(k, v); };
    t["cx"] = [](RunConfig& c, auto k, auto v) { c.synth.camera.cx = to_double(k, v); };
    t["cy"] = [](RunConfig& c, auto k, auto v) { c.synth.camera.cy = to_double(k, v); };
    t["image_width"] = [](RunConfig& c, auto k, auto v) { c.synth.camera.width = to_double(k, v); };
    t["image_height"] = [](RunConfig& c, auto k, auto v) { c.synth.camera.height = to_double(k, v); };
    t["units"] = [](RunConfig& c, auto, auto v) { c.synth.camera.units = parse_image_units(v); };
    t["min_distance"] = [](RunConfig& c, auto k, auto v) { c.synth.min_distance = to_double(k, v); };
    t["max_distance"] = [](RunConfig& c, auto k, auto v) { c.synth.max_distance = to_double(k, v); };
    t["max_lateral"] = [](RunConfig& c, auto k, auto v) { c.synth.max_lateral = to_double(k, v); };
    t["output"] = [](RunConfig& c, auto, auto v) { c.output = std::string(v); };
    t["format"] = [](RunConfig& c, auto, auto v) { c.format = parse_dataset_format(v); };
    t["gradcheck_batch"] = [](RunConfig& c, auto k, auto v) { c.gradcheck_batch = to_size(k, v); };
    return t;
  }();
  return table;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(key).second) {
      throw ValidationError("config line " + std::to_string(line_no) + ": key '" + key + "' repeated");
    }
    out.emplace_back(key, value);
  }
  return out;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ValidationError("unknown config key '" + std::string(key) + "'");
  it->second(cfg, key, value);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  for (const auto& [k, v] : parse_key_values(ss.str())) apply_setting(cfg, k, v);
  return cfg;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

}  // namespace gmlp
