#pragma once

#include "gmlp/model.hpp"

namespace gmlp::detail {

/// Which sub-modules exist in every layer for a given configuration.
struct LayerLayout {
  bool spatial_mlp = false;
  bool spatial_gcn = false;
  bool spatial_gcn_on_tokens = false;
  bool channel_mlp = false;
  bool channel_gcn = false;
  bool mixer = false;
  bool graph_block = false;

  bool spatial_norm() const { return spatial_mlp || spatial_gcn; }
  bool channel_norm() const { return channel_mlp || channel_gcn || mixer; }
};

inline bool is_parallel(Placement p) { return p == Placement::parallel || p == Placement::parallel_spatial_gcn; }

inline LayerLayout layer_layout(const ModelConfig& c) {
  LayerLayout l;
  const bool sg = c.block_toggle != BlockToggle::cg_only;
  const bool cg = c.block_toggle != BlockToggle::sg_only;
  switch (c.variant) {
    case Variant::graphmlp:
      l.spatial_mlp = l.channel_mlp = true;
      if (is_parallel(c.placement)) {
        l.spatial_gcn = sg;
        l.spatial_gcn_on_tokens = sg && c.placement == Placement::parallel_spatial_gcn;
        l.channel_gcn = cg;
      } else {
        l.graph_block = true;
      }
      break;
    case Variant::mlp_mixer:
      l.spatial_mlp = l.channel_mlp = true;
      break;
    case Variant::gcn_only:
      l.spatial_gcn = sg;
      l.channel_gcn = cg;
      break;
    case Variant::graph_mixer:
      l.spatial_mlp = true;
      l.mixer = true;
      break;
  }
  return l;
}

}  // namespace gmlp::detail
