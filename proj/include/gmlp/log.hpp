#pragma once

namespace gmlp {

/// Routes spdlog to stderr at the level named by GRAPHMLP_LOG
/// (error, info or debug; info when unset or unrecognised).
void init_logging();

}  // namespace gmlp
