#pragma once

// Shared helpers for the unit and acceptance tests: seeded random data,
// naive dense linear algebra and loop-level reference forward passes that do
// not use the tensor engine.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "gmlp/graph.hpp"
#include "gmlp/metrics.hpp"
#include "gmlp/model.hpp"
#include "gmlp/tensor.hpp"

namespace testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline gmlp::Tensor random_tensor(Rng& rng, gmlp::Shape shape, bool requires_grad = false) {
  const std::size_t n = gmlp::shape_numel(shape);
  return gmlp::Tensor(std::move(shape), random_vector(rng, n), requires_grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 random_rotation(Rng& rng) {
  // Normalised quaternion with Gaussian components is uniform on SO(3).
  double q[4];
  double norm = 0.0;
  for (double& v : q) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : q) v /= norm;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

inline gmlp::Pose3d similarity(const gmlp::Pose3d& p, double s, const Mat3& r, const gmlp::Vec3& t) {
  gmlp::Pose3d out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (int a = 0; a < 3; ++a) out[i][a] = s * (r[a][0] * p[i][0] + r[a][1] * p[i][1] + r[a][2] * p[i][2]) + t[a];
  }
  return out;
}

inline gmlp::Pose3d random_pose(Rng& rng, std::size_t n, double spread = 500.0) {
  gmlp::Pose3d p(n);
  for (auto& v : p) v = {rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(-spread, spread)};
  return p;
}

inline double frobenius_sq(const gmlp::Pose3d& a, const gmlp::Pose3d& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int k = 0; k < 3; ++k) s += (a[i][k] - b[i][k]) * (a[i][k] - b[i][k]);
  }
  return s;
}

/// Random tree on n joints with up to n/3 random disjoint symmetry pairs that avoid the root.
inline gmlp::SkeletonTopology random_tree(Rng& rng, std::size_t n) {
  gmlp::SkeletonTopology t;
  t.name = "random";
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  t.parent.assign(n, 0);
  t.parent[perm[0]] = perm[0];
  for (std::size_t i = 1; i < n; ++i) t.parent[perm[i]] = perm[rng.index(i)];
  std::vector<std::size_t> free(perm.begin() + 1, perm.end());
  std::shuffle(free.begin(), free.end(), rng.engine());
  const std::size_t pairs = free.size() >= 2 ? rng.index(free.size() / 2 + 1) : 0;
  for (std::size_t k = 0; k < pairs; ++k) t.symmetry_pairs.emplace_back(free[2 * k], free[2 * k + 1]);
  for (std::size_t i = 0; i < n; ++i) t.joint_names.push_back("j" + std::to_string(i));
  return t;
}

/// Eigenvalues of a symmetric n x n matrix by cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i * n + i];
  return ev;
}

// --- loop-level reference forward passes ----------------------------------

using Matrix = std::vector<std::vector<double>>;  // row-major rows

inline Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, std::vector<double>(c, 0.0)); }

inline Matrix transpose(const Matrix& m) {
  Matrix t = zeros(m[0].size(), m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m[0].size(); ++j) t[j][i] = m[i][j];
  }
  return t;
}

/// x[r x in] * w (stored [in x out]) + b.
inline Matrix linear(const Matrix& x, const gmlp::Tensor& w, const gmlp::Tensor* b) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  Matrix y = zeros(x.size(), out);
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b ? b->data()[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += x[r][i] * w.data()[i * out + o];
      y[r][o] = acc;
    }
  }
  return y;
}

inline Matrix layer_norm_rows(const Matrix& x, const gmlp::NormParams& p, double eps) {
  Matrix y = x;
  for (auto& row : y) {
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = (row[j] - mean) / std::sqrt(var + eps) * p.gain.data()[j] + p.bias.data()[j];
    }
  }
  return y;
}

inline Matrix gelu(Matrix x) {
  for (auto& row : x) {
    for (double& v : row) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  }
  return x;
}

inline void add_into(Matrix& x, const Matrix& y) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x[i].size(); ++j) x[i][j] += y[i][j];
  }
}

/// Sum over edge types of A_t * x * W_t plus bias, with explicit loops.
inline Matrix gcn(const Matrix& x, const gmlp::AdjacencySet& adj, const gmlp::GcnParams& p) {
  const std::size_t n = x.size();
  const std::size_t out = p.kernels[0].dim(1);
  Matrix y = zeros(n, out);
  for (std::size_t t = 0; t < adj.matrices.size(); ++t) {
    const Matrix xw = linear(x, p.kernels[t], nullptr);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double a = adj.matrices[t].data()[i * n + j];
        if (a == 0.0) continue;
        for (std::size_t o = 0; o < out; ++o) y[i][o] += a * xw[j][o];
      }
    }
  }
  for (auto& row : y) {
    for (std::size_t o = 0; o < out; ++o) row[o] += p.bias.data()[o];
  }
  return y;
}

/// Frame-major concatenation of a [T, N, 2] input into N rows of 2T values.
inline Matrix embed_input(std::span<const double> pose2d, std::size_t frames, std::size_t joints) {
  Matrix x = zeros(joints, 2 * frames);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < joints; ++n) {
      x[n][2 * t] = pose2d[(t * joints + n) * 2];
      x[n][2 * t + 1] = pose2d[(t * joints + n) * 2 + 1];
    }
  }
  return x;
}

/// Token-mixing MLP on the transposed tokens followed by the channel MLP, per layer.
inline Matrix reference_mlp_mixer(const gmlp::GraphMLPModel& m, std::span<const double> pose2d) {
  const auto& c = m.config();
  Matrix x = linear(embed_input(pose2d, c.frames, c.joints), m.embedding.weight, &m.embedding.bias);
  for (const auto& layer : m.layers) {
    const auto& sm = *layer.spatial_mlp;
    Matrix h = linear(layer_norm_rows(transpose(x), *layer.spatial_norm, c.ln_eps), sm.fc1.weight, &sm.fc1.bias);
    if (sm.fc1_norm) h = layer_norm_rows(h, *sm.fc1_norm, c.ln_eps);
    h = linear(gelu(h), sm.fc2.weight, &sm.fc2.bias);
    if (sm.fc2_norm) h = layer_norm_rows(h, *sm.fc2_norm, c.ln_eps);
    add_into(x, transpose(h));
    const auto& cm = *layer.channel_mlp;
    Matrix g = linear(layer_norm_rows(x, *layer.channel_norm, c.ln_eps), cm.fc1.weight, &cm.fc1.bias);
    add_into(x, linear(gelu(g), cm.fc2.weight, &cm.fc2.bias));
  }
  return linear(x, m.head.weight, &m.head.bias);
}

/// Residual graph-convolution stack: x += GCN(LN over joints), then x += GCN(LN over channels).
inline Matrix reference_gcn_only(const gmlp::GraphMLPModel& m, std::span<const double> pose2d) {
  const auto& c = m.config();
  Matrix x = linear(embed_input(pose2d, c.frames, c.joints), m.embedding.weight, &m.embedding.bias);
  for (const auto& layer : m.layers) {
    if (layer.spatial_gcn) {
      const Matrix z = transpose(layer_norm_rows(transpose(x), *layer.spatial_norm, c.ln_eps));
      add_into(x, gcn(z, m.adjacency(), *layer.spatial_gcn));
    }
    if (layer.channel_gcn) add_into(x, gcn(layer_norm_rows(x, *layer.channel_norm, c.ln_eps), m.adjacency(), *layer.channel_gcn));
  }
  return linear(x, m.head.weight, &m.head.bias);
}

inline std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "graphmlp_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace testing

namespace testing {

struct AdjacencyCheck {
  bool symmetric = true;
  bool disjoint = true;
  bool sums_to_normalized = true;
  double spectral_radius = 0.0;
};

/// Checks a built adjacency set against D^-1/2 (A + I) D^-1/2 assembled
/// directly from the parent links and symmetry pairs.
inline AdjacencyCheck verify_adjacency(const gmlp::SkeletonTopology& topo, std::size_t edge_types) {
  const gmlp::AdjacencySet adj = gmlp::build_adjacency(topo, edge_types);
  const std::size_t n = topo.num_joints();
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    a[i * n + i] = 1.0;
    if (topo.parent[i] != i) a[i * n + topo.parent[i]] = a[topo.parent[i] * n + i] = 1.0;
  }
  for (const auto& [l, r] : topo.symmetry_pairs) a[l * n + r] = a[r * n + l] = 1.0;
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d[i] += a[i * n + j];
  }
  std::vector<double> target(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (a[i * n + j] != 0.0) target[i * n + j] = 1.0 / std::sqrt(d[i] * d[j]);
    }
  }

  AdjacencyCheck out;
  std::vector<double> total(n * n, 0.0);
  std::vector<int> owners(n * n, 0);
  for (const gmlp::Tensor& m : adj.matrices) {
    const auto v = m.data();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (v[i * n + j] != v[j * n + i]) out.symmetric = false;
        if (v[i * n + j] != 0.0) ++owners[i * n + j];
        total[i * n + j] += v[i * n + j];
      }
    }
  }
  for (std::size_t i = 0; i < n * n; ++i) {
    if (owners[i] > 1) out.disjoint = false;
    if (total[i] != target[i]) out.sums_to_normalized = false;
  }
  for (double ev : symmetric_eigenvalues(total, n)) out.spectral_radius = std::max(out.spectral_radius, std::abs(ev));
  return out;
}

}  // namespace testing
