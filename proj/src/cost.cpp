#include "gmlp/error.hpp"
#include "gmlp/model.hpp"
#include "model_layout.hpp"

namespace gmlp {

namespace {

// Nominal per-element operation counts for the elementwise tally.
constexpr std::uint64_t kLayerNormOps = 5;  // centre, square, scale, gain, bias
constexpr std::uint64_t kGeluOps = 4;

}  // namespace

std::uint64_t count_params(const ModelConfig& config) {
  config.validate();
  const std::uint64_t n = config.joints;
  const std::uint64_t c = config.hidden;
  const std::uint64_t ds = config.spatial_dim;
  const std::uint64_t dc = config.channel_dim;
  const std::uint64_t k = config.edge_types;
  const std::uint64_t t = config.frames;
  const detail::LayerLayout lay = detail::layer_layout(config);

  std::uint64_t layer = 0;
  if (lay.spatial_norm()) layer += 2 * n;
  if (lay.spatial_mlp) {
    layer += n * ds + ds + ds * n + n;
    if (config.video_ln) layer += 2 * ds + 2 * n;
  }
  if (lay.spatial_gcn) layer += lay.spatial_gcn_on_tokens ? k * n * n + n : k * c * c + c;
  if (lay.channel_norm()) layer += 2 * c;
  if (lay.channel_mlp) layer += c * dc + dc + dc * c + c;
  if (lay.channel_gcn) layer += k * c * c + c;
  if (lay.mixer) layer += (k * c * dc + dc) + (k * dc * c + c);
  if (lay.graph_block) layer += 2 * c + k * c * c + c;

  const std::uint64_t embedding = 2 * t * c + c;
  const std::uint64_t head = c * 3 + 3;
  return embedding + config.layers * layer + head;
}

namespace {

struct Tally {
  std::uint64_t macs = 0;
  std::uint64_t elementwise = 0;
};

Tally tally(const ModelConfig& config, std::uint64_t nnz) {
  const std::uint64_t n = config.joints;
  const std::uint64_t c = config.hidden;
  const std::uint64_t ds = config.spatial_dim;
  const std::uint64_t dc = config.channel_dim;
  const std::uint64_t k = config.edge_types;
  const std::uint64_t t = config.frames;
  const detail::LayerLayout lay = detail::layer_layout(config);

  // One GCN block c_in -> c_out on N tokens: k kernel products, sparse
  // aggregation, k-1 type sums and the bias add.
  auto gcn = [&](std::uint64_t c_in, std::uint64_t c_out, Tally& acc) {
    acc.macs += k * n * c_in * c_out + nnz * c_out;
    acc.elementwise += (k - 1) * n * c_out + n * c_out;
  };

  Tally layer;
  const std::uint64_t tokens = n * c;
  if (lay.spatial_norm()) layer.elementwise += kLayerNormOps * tokens;
  if (lay.spatial_mlp) {
    layer.macs += c * n * ds + c * ds * n;
    layer.elementwise += c * ds + c * n + kGeluOps * c * ds + tokens;
    if (config.video_ln) layer.elementwise += kLayerNormOps * (c * ds + c * n);
  }
  if (lay.spatial_gcn) {
    if (lay.spatial_gcn_on_tokens) {
      layer.macs += c * nnz + k * c * n * n;
      layer.elementwise += (k - 1) * tokens + tokens;
    } else {
      gcn(c, c, layer);
    }
    layer.elementwise += tokens;
  }
  if (lay.channel_norm()) layer.elementwise += kLayerNormOps * tokens;
  if (lay.channel_mlp) {
    layer.macs += n * c * dc + n * dc * c;
    layer.elementwise += n * dc + tokens + kGeluOps * n * dc + tokens;
  }
  if (lay.channel_gcn) {
    gcn(c, c, layer);
    layer.elementwise += tokens;
  }
  if (lay.mixer) {
    gcn(c, dc, layer);
    layer.elementwise += kGeluOps * n * dc;
    gcn(dc, c, layer);
    layer.elementwise += tokens;
  }
  if (lay.graph_block) {
    layer.elementwise += kLayerNormOps * tokens;
    gcn(c, c, layer);
    layer.elementwise += tokens;
  }

  Tally total;
  total.macs = n * 2 * t * c + config.layers * layer.macs + n * c * 3;
  total.elementwise = tokens + config.layers * layer.elementwise + n * 3;
  return total;
}

}  // namespace

std::uint64_t count_flops(const ModelConfig& config, const AdjacencySet& adjacency) {
  config.validate();
  return 2 * tally(config, adjacency.total_nonzeros()).macs;
}

std::uint64_t count_flops(const ModelConfig& config) {
  return count_flops(config, build_adjacency(build_topology(config.layout), config.edge_types));
}

CostReport cost_report(const ModelConfig& config) {
  config.validate();
  const AdjacencySet adjacency = build_adjacency(build_topology(config.layout), config.edge_types);
  if (adjacency.num_joints != config.joints) {
    throw ValidationError("layout '" + config.layout + "' has " + std::to_string(adjacency.num_joints) +
                          " joints, config expects " + std::to_string(config.joints));
  }
  const Tally t = tally(config, adjacency.total_nonzeros());
  return {count_params(config), 2 * t.macs, t.elementwise};
}

}  // namespace gmlp
