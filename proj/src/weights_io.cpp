#include <fstream>

#include "binary_io.hpp"
#include "gmlp/error.hpp"
#include "gmlp/model.hpp"

namespace gmlp {

namespace {

void write_config(detail::BinaryWriter& w, const ModelConfig& c) {
  w.u32(static_cast<std::uint32_t>(c.layers));
  w.u32(static_cast<std::uint32_t>(c.hidden));
  w.u32(static_cast<std::uint32_t>(c.spatial_dim));
  w.u32(static_cast<std::uint32_t>(c.channel_dim));
  w.u32(static_cast<std::uint32_t>(c.joints));
  w.u32(static_cast<std::uint32_t>(c.frames));
  w.u32(static_cast<std::uint32_t>(c.edge_types));
  w.u32(static_cast<std::uint32_t>(c.variant));
  w.u32(static_cast<std::uint32_t>(c.placement));
  w.u32(static_cast<std::uint32_t>(c.block_toggle));
  w.u8(c.video_ln ? 1 : 0);
  w.u64(c.seed);
  w.f64(c.ln_eps);
  w.f64(c.output_scale);
  w.str(c.layout);
}

template <class E>
E checked_enum(std::uint32_t raw, std::uint32_t count, const char* what) {
  if (raw >= count) throw FormatError(std::string("weight file: invalid ") + what + " code " + std::to_string(raw));
  return static_cast<E>(raw);
}

ModelConfig read_config(detail::BinaryReader& r) {
  ModelConfig c;
  c.layers = r.u32();
  c.hidden = r.u32();
  c.spatial_dim = r.u32();
  c.channel_dim = r.u32();
  c.joints = r.u32();
  c.frames = r.u32();
  c.edge_types = r.u32();
  c.variant = checked_enum<Variant>(r.u32(), 4, "variant");
  c.placement = checked_enum<Placement>(r.u32(), 5, "placement");
  c.block_toggle = checked_enum<BlockToggle>(r.u32(), 3, "block_toggle");
  c.video_ln = r.u8() != 0;
  c.seed = r.u64();
  c.ln_eps = r.f64();
  c.output_scale = r.f64();
  c.layout = r.str();
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("weight file: ") + e.what());
  }
  return c;
}

void write_topology(detail::BinaryWriter& w, const SkeletonTopology& t) {
  w.str(t.name);
  w.u32(static_cast<std::uint32_t>(t.num_joints()));
  for (std::size_t i = 0; i < t.num_joints(); ++i) {
    w.str(i < t.joint_names.size() ? t.joint_names[i] : std::string());
    w.u32(static_cast<std::uint32_t>(t.parent[i]));
  }
  w.u32(static_cast<std::uint32_t>(t.symmetry_pairs.size()));
  for (const auto& [l, r] : t.symmetry_pairs) {
    w.u32(static_cast<std::uint32_t>(l));
    w.u32(static_cast<std::uint32_t>(r));
  }
}

SkeletonTopology read_topology(detail::BinaryReader& r) {
  SkeletonTopology t;
  t.name = r.str();
  const std::uint32_t n = r.u32();
  if (n > 4096) throw FormatError("weight file: implausible joint count " + std::to_string(n));
  for (std::uint32_t i = 0; i < n; ++i) {
    t.joint_names.push_back(r.str());
    t.parent.push_back(r.u32());
  }
  const std::uint32_t pairs = r.u32();
  if (pairs > n) throw FormatError("weight file: implausible symmetry pair count");
  for (std::uint32_t i = 0; i < pairs; ++i) {
    const std::size_t a = r.u32();
    const std::size_t b = r.u32();
    t.symmetry_pairs.emplace_back(a, b);
  }
  try {
    validate_topology(t);
  } catch (const ValidationError& e) {
    throw FormatError(std::string("weight file: ") + e.what());
  }
  return t;
}

// Placeholder chain used only to derive tensor shapes when the caller's
// joint count disagrees with the stored skeleton.
SkeletonTopology chain(std::size_t n) {
  SkeletonTopology t;
  t.name = "chain";
  for (std::size_t i = 0; i < n; ++i) t.parent.push_back(i == 0 ? 0 : i - 1);
  return t;
}

struct Header {
  ModelConfig config;
  SkeletonTopology topology;
};

Header read_header(detail::BinaryReader& r) {
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kWeightMagic)) throw FormatError("weight file: bad magic (expected GMLP)");
  const std::uint32_t version = r.u32();
  if (version != kWeightFormatVersion) {
    throw FormatError("weight file: unsupported format version " + std::to_string(version) + " (expected " +
                      std::to_string(kWeightFormatVersion) + ")");
  }
  Header h;
  h.config = read_config(r);
  h.topology = read_topology(r);
  return h;
}

void read_tensors(detail::BinaryReader& r, GraphMLPModel& model) {
  const std::vector<NamedTensor> params = model.parameters();
  const std::uint32_t count = r.u32();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedTensor& expected = params[i];
    if (i >= count) throw FormatError("weight file: missing tensor '" + expected.name + "'");
    r.set_context("in tensor '" + expected.name + "'");
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw FormatError("weight file: bad rank for tensor '" + expected.name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    if (shape != expected.tensor.shape()) {
      throw FormatError("weight file: tensor '" + expected.name + "' has shape " + shape_str(shape) + " but config expects " +
                        shape_str(expected.tensor.shape()));
    }
    Tensor t = expected.tensor;
    for (double& v : t.mutable_data()) v = r.f64();
  }
  if (count != params.size()) {
    throw FormatError("weight file: holds " + std::to_string(count) + " tensors, config expects " + std::to_string(params.size()));
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file " + path.string());
  return in;
}

void require_equal(bool same, const char* field) {
  if (!same) throw FormatError(std::string("weight file: config field '") + field + "' does not match");
}

}  // namespace

void save_weights(const GraphMLPModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write weight file " + path.string());
  detail::BinaryWriter w(out);
  w.bytes(kWeightMagic, 4);
  w.u32(kWeightFormatVersion);
  write_config(w, model.config());
  write_topology(w, model.topology());
  const auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : p.tensor.data()) w.f64(v);
  }
  out.flush();
  if (!out) throw IoError("failed writing weight file " + path.string());
}

GraphMLPModel load_weights(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  detail::BinaryReader r(in);
  const Header h = read_header(r);
  if (h.topology.num_joints() != h.config.joints) throw FormatError("weight file: skeleton does not match joint count");
  GraphMLPModel model = GraphMLPModel::zeros(h.config, h.topology);
  read_tensors(r, model);
  return model;
}

GraphMLPModel load_weights(const std::filesystem::path& path, const ModelConfig& config) {
  std::ifstream in = open_in(path);
  detail::BinaryReader r(in);
  const Header h = read_header(r);
  const SkeletonTopology& topo = h.topology.num_joints() == config.joints ? h.topology : chain(config.joints);
  GraphMLPModel model = GraphMLPModel::zeros(config, topo);
  read_tensors(r, model);

  const ModelConfig& f = h.config;
  require_equal(f.layers == config.layers, "layers");
  require_equal(f.hidden == config.hidden, "hidden");
  require_equal(f.spatial_dim == config.spatial_dim, "spatial_dim");
  require_equal(f.channel_dim == config.channel_dim, "channel_dim");
  require_equal(f.joints == config.joints, "joints");
  require_equal(f.frames == config.frames, "frames");
  require_equal(f.edge_types == config.edge_types, "edge_types");
  require_equal(f.variant == config.variant, "variant");
  require_equal(f.placement == config.placement, "placement");
  require_equal(f.block_toggle == config.block_toggle, "block_toggle");
  require_equal(f.video_ln == config.video_ln, "video_ln");
  require_equal(f.ln_eps == config.ln_eps, "ln_eps");
  require_equal(f.output_scale == config.output_scale, "output_scale");
  return model;
}

}  // namespace gmlp
