#pragma once

// GraphMLP network: skeleton/video embedding, SG-MLP and CG-MLP blocks with
// parallel GCN branches, the ablation variants, the regression head, and the
// closed-form parameter / FLOP accountant.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmlp/graph.hpp"
#include "gmlp/tensor.hpp"

namespace gmlp {

enum class Variant : std::uint32_t { graphmlp = 0, mlp_mixer = 1, gcn_only = 2, graph_mixer = 3 };

/// Where the GCN sits relative to the MLPs. Only `parallel` and
/// `parallel_spatial_gcn` use the two parallel branches; the other three
/// insert one standalone residual GCN sub-block per layer.
enum class Placement : std::uint32_t {
  parallel = 0,
  before_spatial = 1,
  after_spatial = 2,
  after_channel = 3,
  parallel_spatial_gcn = 4,
};

/// Which parallel GCN branches exist (SG-MLP, CG-MLP or both).
enum class BlockToggle : std::uint32_t { both = 0, sg_only = 1, cg_only = 2 };

std::string_view to_string(Variant v);
std::string_view to_string(Placement p);
std::string_view to_string(BlockToggle t);
Variant parse_variant(std::string_view s);
Placement parse_placement(std::string_view s);
BlockToggle parse_block_toggle(std::string_view s);

inline constexpr Variant kAllVariants[] = {Variant::graphmlp, Variant::mlp_mixer, Variant::gcn_only, Variant::graph_mixer};
inline constexpr Placement kAllPlacements[] = {Placement::parallel, Placement::before_spatial, Placement::after_spatial,
                                               Placement::after_channel, Placement::parallel_spatial_gcn};
inline constexpr BlockToggle kAllToggles[] = {BlockToggle::both, BlockToggle::sg_only, BlockToggle::cg_only};

struct ModelConfig {
  std::size_t layers = 3;
  std::size_t hidden = 512;         // C
  std::size_t spatial_dim = 256;    // D_S
  std::size_t channel_dim = 1024;   // D_C
  std::size_t joints = 17;          // N
  std::size_t frames = 1;           // T
  std::size_t edge_types = 4;       // k
  Variant variant = Variant::graphmlp;
  Placement placement = Placement::parallel;
  BlockToggle block_toggle = BlockToggle::both;
  bool video_ln = false;
  std::uint64_t seed = 0;
  double ln_eps = 1e-5;
  /// Millimetres per model output unit; the head regresses metres by default.
  double output_scale = 1000.0;
  std::string layout = "h36m_17";

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct LinearParams {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

struct NormParams {
  Tensor gain;
  Tensor bias;
};

struct GcnParams {
  std::vector<Tensor> kernels;  // one per edge type
  Tensor bias;
};

struct MlpParams {
  LinearParams fc1;
  LinearParams fc2;
  std::optional<NormParams> fc1_norm;  // video LN after fc1
  std::optional<NormParams> fc2_norm;  // video LN after fc2
};

struct LayerParams {
  std::optional<NormParams> spatial_norm;  // width N, applied to the transposed tokens
  std::optional<MlpParams> spatial_mlp;
  std::optional<GcnParams> spatial_gcn;    // C x C kernels, or N x N for parallel_spatial_gcn
  std::optional<NormParams> channel_norm;  // width C
  std::optional<MlpParams> channel_mlp;
  std::optional<GcnParams> channel_gcn;
  std::optional<GcnParams> mixer_gcn1;     // graph_mixer: C -> D_C
  std::optional<GcnParams> mixer_gcn2;     // graph_mixer: D_C -> C
  std::optional<NormParams> graph_norm;    // standalone GCN sub-block (sequential placements)
  std::optional<GcnParams> graph_gcn;
};

class GraphMLPModel {
 public:
  /// Randomly initialised from config.seed: affine weights and biases and GCN
  /// kernels uniform in +-sqrt(1/fan_in), LN gain 1 and bias 0.
  explicit GraphMLPModel(const ModelConfig& config);
  GraphMLPModel(const ModelConfig& config, const SkeletonTopology& topology);
  /// Same shapes with every parameter (LN gains included) set to zero.
  static GraphMLPModel zeros(const ModelConfig& config, const SkeletonTopology& topology);

  const ModelConfig& config() const { return config_; }
  const SkeletonTopology& topology() const { return topology_; }
  const AdjacencySet& adjacency() const { return adjacency_; }

  LinearParams embedding;
  std::vector<LayerParams> layers;
  LinearParams head;

  /// Every parameter tensor in the fixed serialisation order.
  std::vector<NamedTensor> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  GraphMLPModel(const ModelConfig& config, const SkeletonTopology& topology, bool zero_init);

  ModelConfig config_;
  SkeletonTopology topology_;
  AdjacencySet adjacency_;
};

/// Frame-major concatenation (f0x, f0y, f1x, f1y, ...) per joint followed by
/// one affine map. Accepts [T, N, 2] or a batch [B, T, N, 2].
Tensor embed(const Tensor& pose2d, const GraphMLPModel& model);
/// sum_t A_t x W_t + bias on features [..., N, C].
Tensor gcn_block(const Tensor& x, const AdjacencySet& adjacency, const GcnParams& params);
/// Token-axis GCN on transposed features [..., C, N]: sum_t x A_t W_t + bias with N x N kernels.
Tensor spatial_gcn_block(const Tensor& xt, const AdjacencySet& adjacency, const GcnParams& params);
Tensor sg_mlp(const Tensor& x, const GraphMLPModel& model, std::size_t layer);
Tensor cg_mlp(const Tensor& x, const GraphMLPModel& model, std::size_t layer);
/// Standalone residual GCN sub-block used by the sequential placements.
Tensor graph_block(const Tensor& x, const GraphMLPModel& model, std::size_t layer);
/// [T, N, 2] -> [N, 3], or [B, T, N, 2] -> [B, N, 3], in model units.
Tensor forward(const Tensor& pose2d, const GraphMLPModel& model);

/// Multiply-accumulate counted as 2 FLOPs, batch 1, forward pass only.
struct CostReport {
  std::uint64_t parameter_count = 0;
  /// Affine maps, GCN kernels and adjacency aggregation at its nonzero support.
  std::uint64_t flops = 0;
  /// Bias adds, residual adds, layer norms and GELUs, reported apart from `flops`.
  std::uint64_t elementwise_flops = 0;
};

std::uint64_t count_params(const ModelConfig& config);
std::uint64_t count_flops(const ModelConfig& config, const AdjacencySet& adjacency);
/// Resolves config.layout to build the adjacency.
std::uint64_t count_flops(const ModelConfig& config);
CostReport cost_report(const ModelConfig& config);

inline constexpr char kWeightMagic[4] = {'G', 'M', 'L', 'P'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

void save_weights(const GraphMLPModel& model, const std::filesystem::path& path);
/// Uses the configuration stored in the file header.
GraphMLPModel load_weights(const std::filesystem::path& path);
/// Checks every tensor shape and header field against `config`.
GraphMLPModel load_weights(const std::filesystem::path& path, const ModelConfig& config);

}  // namespace gmlp
