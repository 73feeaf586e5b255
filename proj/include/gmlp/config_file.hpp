#pragma once

// Flat `key = value` run configuration shared by every subcommand.
// Lines starting with '#' and blank lines are ignored; unknown keys are errors.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmlp/data.hpp"
#include "gmlp/train.hpp"

namespace gmlp {

struct RunConfig {
  TrainConfig train;  // includes the model configuration
  SyntheticConfig synth;
  std::filesystem::path output = "synthetic.jsonl";  // synth destination
  std::optional<DatasetFormat> format;               // synth format; default from the output extension
  std::size_t gradcheck_batch = 2;
  /// True once any model key has been set from a file or flag.
  bool model_keys_set = false;
};

/// Parses the text into ordered key/value pairs. Throws ValidationError on a
/// malformed line or a repeated key, naming the line number.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

/// Applies one setting. `seed` sets the model, shuffling and synthetic seeds.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

RunConfig load_run_config(const std::filesystem::path& path);

/// Every accepted key, sorted.
std::vector<std::string> config_keys();

}  // namespace gmlp
