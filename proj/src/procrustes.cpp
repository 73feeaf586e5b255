#include <algorithm>
#include <cmath>
#include <numeric>

#include "gmlp/error.hpp"
#include "gmlp/metrics.hpp"

namespace gmlp {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Vec3 column(const Mat3& m, int c) { return {m[0][c], m[1][c], m[2][c]}; }

void set_column(Mat3& m, int c, const Vec3& v) {
  for (int r = 0; r < 3; ++r) m[r][c] = v[r];
}

double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 cross3(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(dot3(v, v));
  return {v[0] / n, v[1] / n, v[2] / n};
}

double det3(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

// Any unit vector orthogonal to `a`.
Vec3 orthogonal_to(const Vec3& a) {
  const int smallest = std::abs(a[0]) <= std::abs(a[1]) ? (std::abs(a[0]) <= std::abs(a[2]) ? 0 : 2)
                                                        : (std::abs(a[1]) <= std::abs(a[2]) ? 1 : 2);
  Vec3 e{0.0, 0.0, 0.0};
  e[smallest] = 1.0;
  return normalized(cross3(a, e));
}

Vec3 centroid(std::span<const Vec3> pts) {
  Vec3 c{0.0, 0.0, 0.0};
  for (const Vec3& p : pts) {
    for (int i = 0; i < 3; ++i) c[i] += p[i];
  }
  for (double& v : c) v /= static_cast<double>(pts.size());
  return c;
}

}  // namespace

Svd3 svd3(const Mat3& a, double tolerance, int max_sweeps) {
  Mat3 w = a;
  Mat3 v{};
  for (int i = 0; i < 3; ++i) v[i][i] = 1.0;

  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int i = 0; i < 2; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (int k = 0; k < 3; ++k) {
          alpha += w[k][i] * w[k][i];
          beta += w[k][j] * w[k][j];
          gamma += w[k][i] * w[k][j];
        }
        if (gamma == 0.0 || std::abs(gamma) <= tolerance * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int k = 0; k < 3; ++k) {
          const double wi = w[k][i], wj = w[k][j];
          w[k][i] = c * wi - s * wj;
          w[k][j] = s * wi + c * wj;
          const double vi = v[k][i], vj = v[k][j];
          v[k][i] = c * vi - s * vj;
          v[k][j] = s * vi + c * vj;
        }
      }
    }
    if (!rotated) break;
  }

  std::array<double, 3> sigma{};
  for (int i = 0; i < 3; ++i) sigma[i] = std::sqrt(dot3(column(w, i), column(w, i)));
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int x, int y) { return sigma[x] > sigma[y]; });

  Svd3 out;
  out.sweeps = sweep;
  for (int r = 0; r < 3; ++r) {
    const int src = order[r];
    out.s[r] = sigma[src];
    set_column(out.v, r, column(v, src));
  }
  // Columns of u for negligible singular values are completed to an
  // orthonormal basis.
  const double tiny = std::max(out.s[0], 1.0) * 1e-300;
  int rank = 0;
  for (int r = 0; r < 3; ++r) {
    if (out.s[r] > tiny && out.s[r] > out.s[0] * 1e-15) {
      const Vec3 col = column(w, order[r]);
      set_column(out.u, r, {col[0] / out.s[r], col[1] / out.s[r], col[2] / out.s[r]});
      ++rank;
    }
  }
  if (rank == 0) {
    for (int i = 0; i < 3; ++i) out.u[i][i] = 1.0;
  } else if (rank == 1) {
    const Vec3 u0 = column(out.u, 0);
    const Vec3 u1 = orthogonal_to(u0);
    set_column(out.u, 1, u1);
    set_column(out.u, 2, cross3(u0, u1));
  } else if (rank == 2) {
    set_column(out.u, 2, normalized(cross3(column(out.u, 0), column(out.u, 1))));
  }
  return out;
}

Pose3d procrustes_align(std::span<const Vec3> pred, std::span<const Vec3> target) {
  if (pred.size() != target.size()) throw ShapeError("procrustes_align: joint counts differ");
  if (pred.size() < 3) throw AlignmentError("procrustes_align: need at least 3 joints");
  const std::size_t n = pred.size();
  const Vec3 mu_p = centroid(pred);
  const Vec3 mu_t = centroid(target);

  Mat3 target_cov{};
  Mat3 cross{};
  double pred_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p, t;
    for (int a = 0; a < 3; ++a) {
      p[a] = pred[i][a] - mu_p[a];
      t[a] = target[i][a] - mu_t[a];
    }
    pred_norm += dot3(p, p);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        target_cov[a][b] += t[a] * t[b];
        cross[a][b] += p[a] * t[b];
      }
    }
  }

  const Svd3 tc = svd3(target_cov);
  if (tc.s[0] == 0.0 || tc.s[1] <= 1e-14 * tc.s[0]) {
    throw AlignmentError("procrustes_align: target is degenerate (collinear or coincident joints)");
  }

  const Svd3 h = svd3(cross);
  const double d = det3(h.u) * det3(h.v) < 0.0 ? -1.0 : 1.0;
  // R = V * diag(1, 1, d) * U^T maps centred pred onto centred target.
  Mat3 rot{};
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      rot[a][b] = h.v[a][0] * h.u[b][0] + h.v[a][1] * h.u[b][1] + d * h.v[a][2] * h.u[b][2];
    }
  }
  const double scale = pred_norm > 0.0 ? (h.s[0] + h.s[1] + d * h.s[2]) / pred_norm : 0.0;

  Pose3d aligned(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = pred[i][a] - mu_p[a];
    for (int a = 0; a < 3; ++a) aligned[i][a] = scale * dot3(rot[a], p) + mu_t[a];
  }
  return aligned;
}

double pa_mpjpe(std::span<const Vec3> pred, std::span<const Vec3> target) {
  const Pose3d aligned = procrustes_align(pred, target);
  return mpjpe(aligned, target);
}

}  // namespace gmlp
