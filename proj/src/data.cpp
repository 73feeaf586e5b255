#include "gmlp/data.hpp"

#include <cmath>
#include <utility>

#include "gmlp/error.hpp"
#include "random.hpp"

namespace gmlp {

std::string_view to_string(ImageUnits u) { return u == ImageUnits::pixels ? "pixels" : "normalized"; }

ImageUnits parse_image_units(std::string_view s) {
  if (s == "pixels") return ImageUnits::pixels;
  if (s == "normalized") return ImageUnits::normalized;
  throw ValidationError("unknown image units '" + std::string(s) + "' (expected pixels or normalized)");
}

std::array<double, 2> project(const Vec3& p, const CameraModel& cam) {
  const double u = cam.focal * p[0] / p[2] + cam.cx;
  const double v = cam.focal * p[1] / p[2] + cam.cy;
  if (cam.units == ImageUnits::pixels) return {u, v};
  // Both axes are scaled by the width so that the aspect ratio is kept.
  return {2.0 * (u - cam.cx) / cam.width, 2.0 * (v - cam.cy) / cam.width};
}

void PoseSample::validate() const {
  if (frames == 0 || joints == 0) throw ShapeError("sample '" + id + "': frames and joints must be >= 1");
  if (pose2d.size() != frames * joints * 2) {
    throw ShapeError("sample '" + id + "': pose2d has " + std::to_string(pose2d.size()) + " values, expected " +
                     std::to_string(frames * joints * 2));
  }
  if (pose3d.size() != joints * 3) {
    throw ShapeError("sample '" + id + "': pose3d has " + std::to_string(pose3d.size()) + " values, expected " +
                     std::to_string(joints * 3));
  }
}

Tensor PoseSample::input() const {
  validate();
  return Tensor({frames, joints, 2}, pose2d);
}

Pose3d PoseSample::target() const {
  validate();
  Pose3d out(joints);
  for (std::size_t j = 0; j < joints; ++j) out[j] = {pose3d[3 * j], pose3d[3 * j + 1], pose3d[3 * j + 2]};
  return out;
}

void SyntheticConfig::validate() const {
  if (frames == 0) throw ValidationError("synthetic: frames must be >= 1");
  for (double l : bone_lengths) {
    if (!(l > 0.0)) throw ValidationError("synthetic: bone lengths must be > 0");
  }
  if (!(camera.focal > 0.0) || !(camera.width > 0.0) || !(camera.height > 0.0)) {
    throw ValidationError("synthetic: camera focal length and image size must be > 0");
  }
  if (!(min_distance > 0.0) || min_distance > max_distance) {
    throw ValidationError("synthetic: distance range must satisfy 0 < min <= max");
  }
  if (max_bend < 0.0 || walk_step < 0.0 || max_yaw < 0.0 || max_lateral < 0.0) {
    throw ValidationError("synthetic: angle and offset ranges must be >= 0");
  }
}

namespace {

using Mat3 = std::array<Vec3, 3>;

Mat3 matmul3(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
  }
  return c;
}

Vec3 mat_vec(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2], m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
}
Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
}
Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

// Rest direction of each bone in a y-up body frame.
std::vector<Vec3> rest_directions(const SkeletonTopology& topo) {
  const std::size_t n = topo.num_joints();
  if (topo.name == "h36m_17" && n == 17) {
    return {{0, 0, 0},  {-1, 0, 0}, {0, -1, 0}, {0, -1, 0}, {1, 0, 0},  {0, -1, 0}, {0, -1, 0}, {0, 1, 0}, {0, 1, 0},
            {0, 1, 0},  {0, 1, 0},  {1, 0, 0},  {0, -1, 0}, {0, -1, 0}, {-1, 0, 0}, {0, -1, 0}, {0, -1, 0}};
  }
  std::vector<int> side(n, 0);
  for (const auto& [l, r] : topo.symmetry_pairs) {
    side[l] = 1;
    side[r] = -1;
  }
  const auto depth = topo.depths();
  std::vector<Vec3> dirs(n, Vec3{0, 0, 0});
  for (std::size_t j = 0; j < n; ++j) {
    if (topo.parent[j] == j) continue;
    if (side[j] != 0 && depth[j] == 1) {
      dirs[j] = {static_cast<double>(side[j]), 0, 0};
    } else {
      dirs[j] = side[j] != 0 ? Vec3{0, -1, 0} : Vec3{0, 1, 0};
    }
  }
  return dirs;
}

struct BodyState {
  std::vector<double> bend_x;
  std::vector<double> bend_z;
  double yaw = 0.0;
};

// Root-relative joint positions in the camera frame (x right, y down).
std::vector<Vec3> pose_camera_frame(const SkeletonTopology& topo, const std::vector<double>& lengths,
                                    const std::vector<Vec3>& dirs, const BodyState& s) {
  const std::size_t n = topo.num_joints();
  const std::size_t root = topo.root();
  std::vector<Vec3> pos(n, Vec3{0, 0, 0});
  std::vector<Mat3> rot(n);
  std::vector<bool> done(n, false);
  rot[root] = rot_y(s.yaw);
  done[root] = true;
  // Parents are resolved before children by walking up until a finished joint.
  std::vector<std::size_t> stack;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = j; !done[k]; k = topo.parent[k]) stack.push_back(k);
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      const std::size_t p = topo.parent[k];
      rot[k] = matmul3(rot[p], matmul3(rot_x(s.bend_x[k]), rot_z(s.bend_z[k])));
      const Vec3 d = mat_vec(rot[k], dirs[k]);
      for (int a = 0; a < 3; ++a) pos[k][a] = pos[p][a] + lengths[k] * d[a];
      done[k] = true;
    }
  }
  for (Vec3& v : pos) v[1] = -v[1];
  return pos;
}

}  // namespace

std::vector<double> default_bone_lengths(const SkeletonTopology& topo) {
  const std::size_t n = topo.num_joints();
  if (topo.name == "h36m_17" && n == 17) {
    return {0, 132, 442, 454, 132, 442, 454, 233, 257, 121, 115, 151, 278, 251, 151, 278, 251};
  }
  if (topo.name == "toy_5" && n == 5) return {0, 100, 100, 400, 400};
  std::vector<double> out(n, 200.0);
  out[topo.root()] = 0.0;
  return out;
}

std::vector<PoseSample> generate_synthetic(const SyntheticConfig& cfg, const SkeletonTopology& topo) {
  cfg.validate();
  validate_topology(topo);
  const std::size_t n = topo.num_joints();
  const std::size_t root = topo.root();
  std::vector<double> lengths = cfg.bone_lengths.empty() ? default_bone_lengths(topo) : cfg.bone_lengths;
  if (lengths.size() != n) {
    throw ValidationError("synthetic: " + std::to_string(lengths.size()) + " bone lengths for " + std::to_string(n) +
                          " joints");
  }
  lengths[root] = 0.0;
  const std::vector<Vec3> dirs = rest_directions(topo);
  const std::size_t t_count = cfg.frames;
  const std::size_t centre = t_count / 2;

  detail::Uniform rng(cfg.seed);
  std::vector<PoseSample> out;
  out.reserve(cfg.num_samples);
  for (std::size_t i = 0; i < cfg.num_samples; ++i) {
    BodyState state;
    state.bend_x.assign(n, 0.0);
    state.bend_z.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == root) continue;
      state.bend_x[j] = rng(-cfg.max_bend, cfg.max_bend);
      state.bend_z[j] = rng(-cfg.max_bend, cfg.max_bend);
    }
    state.yaw = rng(-cfg.max_yaw, cfg.max_yaw);
    SampleCamera cam;
    cam.intrinsics = cfg.camera;
    cam.root_translation = {rng(-cfg.max_lateral, cfg.max_lateral), rng(-cfg.max_lateral, cfg.max_lateral),
                            rng(cfg.min_distance, cfg.max_distance)};

    PoseSample s;
    s.id = "synth-" + std::to_string(cfg.seed) + "-" + std::to_string(i);
    s.frames = t_count;
    s.joints = n;
    s.pose2d.resize(t_count * n * 2);
    auto clamp_step = [&](double v) {
      return std::clamp(v + rng(-cfg.walk_step, cfg.walk_step), -cfg.max_bend, cfg.max_bend);
    };
    for (std::size_t t = 0; t < t_count; ++t) {
      if (t > 0) {
        for (std::size_t j = 0; j < n; ++j) {
          if (j == root) continue;
          state.bend_x[j] = clamp_step(state.bend_x[j]);
          state.bend_z[j] = clamp_step(state.bend_z[j]);
        }
        state.yaw += rng(-cfg.walk_step, cfg.walk_step);
      }
      const std::vector<Vec3> pose = pose_camera_frame(topo, lengths, dirs, state);
      for (std::size_t j = 0; j < n; ++j) {
        const Vec3 p{pose[j][0] + cam.root_translation[0], pose[j][1] + cam.root_translation[1],
                     pose[j][2] + cam.root_translation[2]};
        const auto uv = project(p, cam.intrinsics);
        s.pose2d[(t * n + j) * 2] = uv[0];
        s.pose2d[(t * n + j) * 2 + 1] = uv[1];
      }
      if (t == centre) {
        s.pose3d.resize(n * 3);
        for (std::size_t j = 0; j < n; ++j) {
          for (int a = 0; a < 3; ++a) s.pose3d[3 * j + a] = pose[j][a];
        }
      }
    }
    s.camera = cam;
    out.push_back(std::move(s));
  }
  return out;
}

PoseSample horizontal_flip(const PoseSample& sample, const SkeletonTopology& topo) {
  sample.validate();
  if (topo.num_joints() != sample.joints) {
    throw ShapeError("horizontal_flip: sample has " + std::to_string(sample.joints) + " joints, layout has " +
                     std::to_string(topo.num_joints()));
  }
  std::vector<std::size_t> mirror(sample.joints);
  for (std::size_t j = 0; j < mirror.size(); ++j) mirror[j] = j;
  for (const auto& [l, r] : topo.symmetry_pairs) std::swap(mirror[l], mirror[r]);

  PoseSample out = sample;
  const std::size_t n = sample.joints;
  for (std::size_t t = 0; t < sample.frames; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t src = (t * n + mirror[j]) * 2;
      out.pose2d[(t * n + j) * 2] = -sample.pose2d[src];
      out.pose2d[(t * n + j) * 2 + 1] = sample.pose2d[src + 1];
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    out.pose3d[3 * j] = -sample.pose3d[3 * mirror[j]];
    out.pose3d[3 * j + 1] = sample.pose3d[3 * mirror[j] + 1];
    out.pose3d[3 * j + 2] = sample.pose3d[3 * mirror[j] + 2];
  }
  if (out.camera) {
    out.camera->intrinsics.cx = -out.camera->intrinsics.cx;
    out.camera->root_translation[0] = -out.camera->root_translation[0];
  }
  return out;
}

PoseSample quantize_f32(const PoseSample& sample) {
  PoseSample out = sample;
  for (double& v : out.pose2d) v = static_cast<float>(v);
  for (double& v : out.pose3d) v = static_cast<float>(v);
  return out;
}

}  // namespace gmlp
