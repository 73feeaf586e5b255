#include "gmlp/model.hpp"

#include <cmath>

#include "gmlp/error.hpp"
#include "model_layout.hpp"
#include "random.hpp"

namespace gmlp {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::graphmlp:
      return "graphmlp";
    case Variant::mlp_mixer:
      return "mlp_mixer";
    case Variant::gcn_only:
      return "gcn_only";
    case Variant::graph_mixer:
      return "graph_mixer";
  }
  return "?";
}

std::string_view to_string(Placement p) {
  switch (p) {
    case Placement::parallel:
      return "parallel";
    case Placement::before_spatial:
      return "before_spatial";
    case Placement::after_spatial:
      return "after_spatial";
    case Placement::after_channel:
      return "after_channel";
    case Placement::parallel_spatial_gcn:
      return "parallel_spatial_gcn";
  }
  return "?";
}

std::string_view to_string(BlockToggle t) {
  switch (t) {
    case BlockToggle::both:
      return "both";
    case BlockToggle::sg_only:
      return "sg_only";
    case BlockToggle::cg_only:
      return "cg_only";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown variant '" + std::string(s) + "'");
}

Placement parse_placement(std::string_view s) {
  for (Placement p : kAllPlacements) {
    if (to_string(p) == s) return p;
  }
  throw ValidationError("unknown placement '" + std::string(s) + "'");
}

BlockToggle parse_block_toggle(std::string_view s) {
  for (BlockToggle t : kAllToggles) {
    if (to_string(t) == s) return t;
  }
  throw ValidationError("unknown block_toggle '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ValidationError(std::string("model config: ") + name + " must be >= 1");
  };
  positive(layers, "layers");
  positive(hidden, "hidden");
  positive(spatial_dim, "spatial_dim");
  positive(channel_dim, "channel_dim");
  positive(joints, "joints");
  positive(frames, "frames");
  if (edge_types < 1 || edge_types > kMaxEdgeTypes) throw ValidationError("model config: edge_types must be in 1..4");
  if (!(ln_eps > 0.0)) throw ValidationError("model config: ln_eps must be positive");
  if (!(output_scale > 0.0)) throw ValidationError("model config: output_scale must be positive");
}

// --- construction ------------------------------------------------------------

namespace {

class Initializer {
 public:
  Initializer(std::uint64_t seed, bool zero) : rng_(seed), zero_(zero) {}

  Tensor uniform(Shape shape, std::size_t fan_in) {
    if (zero_) return Tensor::zeros(std::move(shape), true);
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) {
      v = rng_(-bound, bound);
    }
    return Tensor(std::move(shape), std::move(data), true);
  }

  LinearParams linear(std::size_t in, std::size_t out) {
    LinearParams p;
    p.weight = uniform({in, out}, in);
    p.bias = uniform({out}, in);
    return p;
  }

  NormParams norm(std::size_t width) const {
    return {Tensor::filled({width}, zero_ ? 0.0 : 1.0, true), Tensor::zeros({width}, true)};
  }

  GcnParams gcn(std::size_t kernels, std::size_t in, std::size_t out) {
    GcnParams p;
    for (std::size_t t = 0; t < kernels; ++t) p.kernels.push_back(uniform({in, out}, in));
    p.bias = uniform({out}, in);
    return p;
  }

 private:
  detail::Uniform rng_;
  bool zero_;
};

}  // namespace

GraphMLPModel::GraphMLPModel(const ModelConfig& config) : GraphMLPModel(config, build_topology(config.layout)) {}

GraphMLPModel::GraphMLPModel(const ModelConfig& config, const SkeletonTopology& topology)
    : GraphMLPModel(config, topology, false) {}

GraphMLPModel GraphMLPModel::zeros(const ModelConfig& config, const SkeletonTopology& topology) {
  return GraphMLPModel(config, topology, true);
}

GraphMLPModel::GraphMLPModel(const ModelConfig& config, const SkeletonTopology& topology, bool zero_init)
    : config_(config), topology_(topology) {
  config_.validate();
  validate_topology(topology_);
  if (topology_.num_joints() != config_.joints) {
    throw ValidationError("model config has " + std::to_string(config_.joints) + " joints but layout '" + topology_.name +
                          "' has " + std::to_string(topology_.num_joints()));
  }
  adjacency_ = build_adjacency(topology_, config_.edge_types);

  const std::size_t n = config_.joints;
  const std::size_t c = config_.hidden;
  const std::size_t ds = config_.spatial_dim;
  const std::size_t dc = config_.channel_dim;
  const std::size_t k = config_.edge_types;
  const detail::LayerLayout lay = detail::layer_layout(config_);

  // Construction order is the serialisation order of parameters().
  Initializer init(config_.seed, zero_init);
  embedding = init.linear(2 * config_.frames, c);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    LayerParams p;
    if (lay.spatial_norm()) p.spatial_norm = init.norm(n);
    if (lay.spatial_mlp) {
      MlpParams m;
      m.fc1 = init.linear(n, ds);
      if (config_.video_ln) m.fc1_norm = init.norm(ds);
      m.fc2 = init.linear(ds, n);
      if (config_.video_ln) m.fc2_norm = init.norm(n);
      p.spatial_mlp = std::move(m);
    }
    if (lay.spatial_gcn) p.spatial_gcn = lay.spatial_gcn_on_tokens ? init.gcn(k, n, n) : init.gcn(k, c, c);
    if (lay.channel_norm()) p.channel_norm = init.norm(c);
    if (lay.channel_mlp) {
      MlpParams m;
      m.fc1 = init.linear(c, dc);
      m.fc2 = init.linear(dc, c);
      p.channel_mlp = std::move(m);
    }
    if (lay.channel_gcn) p.channel_gcn = init.gcn(k, c, c);
    if (lay.mixer) {
      p.mixer_gcn1 = init.gcn(k, c, dc);
      p.mixer_gcn2 = init.gcn(k, dc, c);
    }
    if (lay.graph_block) {
      p.graph_norm = init.norm(c);
      p.graph_gcn = init.gcn(k, c, c);
    }
    layers.push_back(std::move(p));
  }
  head = init.linear(c, 3);
}

std::vector<NamedTensor> GraphMLPModel::parameters() const {
  std::vector<NamedTensor> out;
  auto linear = [&](const std::string& prefix, const LinearParams& p) {
    out.push_back({prefix + ".weight", p.weight});
    out.push_back({prefix + ".bias", p.bias});
  };
  auto norm = [&](const std::string& prefix, const NormParams& p) {
    out.push_back({prefix + ".gain", p.gain});
    out.push_back({prefix + ".bias", p.bias});
  };
  auto gcn = [&](const std::string& prefix, const GcnParams& p) {
    for (std::size_t t = 0; t < p.kernels.size(); ++t) out.push_back({prefix + ".kernel" + std::to_string(t), p.kernels[t]});
    out.push_back({prefix + ".bias", p.bias});
  };

  linear("embedding", embedding);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerParams& p = layers[l];
    const std::string pre = "layers." + std::to_string(l) + ".";
    if (p.spatial_norm) norm(pre + "spatial_norm", *p.spatial_norm);
    if (p.spatial_mlp) {
      linear(pre + "spatial_mlp.fc1", p.spatial_mlp->fc1);
      if (p.spatial_mlp->fc1_norm) norm(pre + "spatial_mlp.fc1_norm", *p.spatial_mlp->fc1_norm);
      linear(pre + "spatial_mlp.fc2", p.spatial_mlp->fc2);
      if (p.spatial_mlp->fc2_norm) norm(pre + "spatial_mlp.fc2_norm", *p.spatial_mlp->fc2_norm);
    }
    if (p.spatial_gcn) gcn(pre + "spatial_gcn", *p.spatial_gcn);
    if (p.channel_norm) norm(pre + "channel_norm", *p.channel_norm);
    if (p.channel_mlp) {
      linear(pre + "channel_mlp.fc1", p.channel_mlp->fc1);
      linear(pre + "channel_mlp.fc2", p.channel_mlp->fc2);
    }
    if (p.channel_gcn) gcn(pre + "channel_gcn", *p.channel_gcn);
    if (p.mixer_gcn1) gcn(pre + "mixer_gcn1", *p.mixer_gcn1);
    if (p.mixer_gcn2) gcn(pre + "mixer_gcn2", *p.mixer_gcn2);
    if (p.graph_norm) norm(pre + "graph_norm", *p.graph_norm);
    if (p.graph_gcn) gcn(pre + "graph_gcn", *p.graph_gcn);
  }
  linear("head", head);
  return out;
}

std::size_t GraphMLPModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.tensor.numel();
  return total;
}

void GraphMLPModel::zero_grad() {
  for (auto& p : parameters()) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

// --- forward -------------------------------------------------------------------

namespace {

Tensor affine(const Tensor& x, const LinearParams& p) { return add(matmul(x, p.weight), p.bias); }

Tensor norm(const Tensor& x, const NormParams& p, double eps) { return layer_norm(x, p.gain, p.bias, eps); }

Tensor mlp(const Tensor& x, const MlpParams& p, double eps) {
  Tensor h = affine(x, p.fc1);
  if (p.fc1_norm) h = norm(h, *p.fc1_norm, eps);
  h = gelu(h);
  h = affine(h, p.fc2);
  if (p.fc2_norm) h = norm(h, *p.fc2_norm, eps);
  return h;
}

// Frame t of a [B, T, N, 2] input as [B, N, 2].
Tensor select_frame(const Tensor& input, std::size_t batch, std::size_t frames, std::size_t t) {
  const std::size_t slice = input.numel() / (batch * frames);
  std::vector<double> out(batch * slice);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* src = input.data().data() + (b * frames + t) * slice;
    std::copy_n(src, slice, out.data() + b * slice);
  }
  Shape shape = {batch, input.dim(input.rank() - 2), 2};
  return make_result(std::move(shape), std::move(out), {input}, [input, batch, frames, t, slice](std::span<const double> g) mutable {
    double* dst = input.grad_storage().data();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < slice; ++i) dst[(b * frames + t) * slice + i] += g[b * slice + i];
    }
  });
}

}  // namespace

Tensor embed(const Tensor& pose2d, const GraphMLPModel& model) {
  const ModelConfig& cfg = model.config();
  const bool batched = pose2d.rank() == 4;
  const Shape& s = pose2d.shape();
  const std::size_t off = batched ? 1 : 0;
  if ((pose2d.rank() != 3 && pose2d.rank() != 4) || s[off] != cfg.frames || s[off + 1] != cfg.joints || s[off + 2] != 2) {
    throw ShapeError("embed: expected input (T=" + std::to_string(cfg.frames) + ", N=" + std::to_string(cfg.joints) +
                     ", 2), got " + shape_str(s));
  }
  const std::size_t batch = batched ? s[0] : 1;
  std::vector<Tensor> frames;
  frames.reserve(cfg.frames);
  for (std::size_t t = 0; t < cfg.frames; ++t) frames.push_back(select_frame(pose2d, batch, cfg.frames, t));
  Tensor tokens = cfg.frames == 1 ? frames[0] : concat_last_axis(frames);
  if (!batched) tokens = reshape(tokens, {cfg.joints, 2 * cfg.frames});
  return affine(tokens, model.embedding);
}

Tensor gcn_block(const Tensor& x, const AdjacencySet& adjacency, const GcnParams& params) {
  if (params.kernels.size() != adjacency.matrices.size()) {
    throw ShapeError("gcn_block: " + std::to_string(params.kernels.size()) + " kernels for " +
                     std::to_string(adjacency.matrices.size()) + " edge types");
  }
  Tensor acc;
  for (std::size_t t = 0; t < params.kernels.size(); ++t) {
    Tensor term = apply_left(adjacency.matrices[t], matmul(x, params.kernels[t]));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return add(acc, params.bias);
}

Tensor spatial_gcn_block(const Tensor& xt, const AdjacencySet& adjacency, const GcnParams& params) {
  if (params.kernels.size() != adjacency.matrices.size()) {
    throw ShapeError("spatial_gcn_block: kernel count does not match edge types");
  }
  Tensor acc;
  for (std::size_t t = 0; t < params.kernels.size(); ++t) {
    // Normalised adjacency is symmetric, so right-multiplication aggregates over joints.
    Tensor term = matmul(matmul(xt, adjacency.matrices[t]), params.kernels[t]);
    acc = acc.defined() ? add(acc, term) : term;
  }
  return add(acc, params.bias);
}

Tensor sg_mlp(const Tensor& x, const GraphMLPModel& model, std::size_t layer) {
  const LayerParams& p = model.layers.at(layer);
  if (!p.spatial_norm) return x;
  const double eps = model.config().ln_eps;
  const Tensor z = norm(swap_last_axes(x), *p.spatial_norm, eps);  // [..., C, N]
  Tensor out = x;
  if (p.spatial_mlp) out = add(out, swap_last_axes(mlp(z, *p.spatial_mlp, eps)));
  if (p.spatial_gcn) {
    if (model.config().placement == Placement::parallel_spatial_gcn && model.config().variant == Variant::graphmlp) {
      out = add(out, swap_last_axes(spatial_gcn_block(z, model.adjacency(), *p.spatial_gcn)));
    } else {
      out = add(out, gcn_block(swap_last_axes(z), model.adjacency(), *p.spatial_gcn));
    }
  }
  return out;
}

Tensor cg_mlp(const Tensor& x, const GraphMLPModel& model, std::size_t layer) {
  const LayerParams& p = model.layers.at(layer);
  if (!p.channel_norm) return x;
  const Tensor z = norm(x, *p.channel_norm, model.config().ln_eps);
  Tensor out = x;
  if (p.channel_mlp) out = add(out, mlp(z, *p.channel_mlp, model.config().ln_eps));
  if (p.channel_gcn) out = add(out, gcn_block(z, model.adjacency(), *p.channel_gcn));
  if (p.mixer_gcn1) {
    const Tensor h = gelu(gcn_block(z, model.adjacency(), *p.mixer_gcn1));
    out = add(out, gcn_block(h, model.adjacency(), *p.mixer_gcn2));
  }
  return out;
}

Tensor graph_block(const Tensor& x, const GraphMLPModel& model, std::size_t layer) {
  const LayerParams& p = model.layers.at(layer);
  if (!p.graph_gcn) return x;
  return add(x, gcn_block(norm(x, *p.graph_norm, model.config().ln_eps), model.adjacency(), *p.graph_gcn));
}

Tensor forward(const Tensor& pose2d, const GraphMLPModel& model) {
  Tensor x = embed(pose2d, model);
  const Placement placement = model.config().placement;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    if (placement == Placement::before_spatial) x = graph_block(x, model, l);
    x = sg_mlp(x, model, l);
    if (placement == Placement::after_spatial) x = graph_block(x, model, l);
    x = cg_mlp(x, model, l);
    if (placement == Placement::after_channel) x = graph_block(x, model, l);
  }
  return affine(x, model.head);
}

}  // namespace gmlp
