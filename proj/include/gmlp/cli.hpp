#pragma once

// Subcommands of the graphmlp tool: train, eval, cost, gradcheck, synth.
// Machine-readable results go to `out` as JSON; diagnostics go to `err`.

#include <ostream>
#include <string>
#include <vector>

#include "gmlp/model.hpp"

namespace gmlp {

/// `args` excludes the program name. Returns the process exit code:
/// 0 success, 1 runtime failure or failed check, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string model_config_json(const ModelConfig& config);

}  // namespace gmlp
