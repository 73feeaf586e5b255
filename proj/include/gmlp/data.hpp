#pragma once

// Pose samples, the synthetic forward-kinematics generator, horizontal-flip
// augmentation and the JSON-lines / binary dataset formats (docs/formats.md).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gmlp/graph.hpp"
#include "gmlp/metrics.hpp"
#include "gmlp/tensor.hpp"

namespace gmlp {

enum class ImageUnits { pixels, normalized };

std::string_view to_string(ImageUnits u);
ImageUnits parse_image_units(std::string_view s);

/// Pinhole camera; x right, y down, z forward, millimetres.
struct CameraModel {
  double focal = 1150.0;
  double cx = 500.0;
  double cy = 500.0;
  double width = 1000.0;
  double height = 1000.0;
  ImageUnits units = ImageUnits::normalized;

  bool operator==(const CameraModel&) const = default;
};

/// Image coordinates of a camera-frame point in the camera's units.
std::array<double, 2> project(const Vec3& point, const CameraModel& camera);

/// Camera metadata of a synthetic sample. `root_translation` places the
/// root-relative pose3d in the camera frame: point = pose3d[j] + root_translation.
struct SampleCamera {
  CameraModel intrinsics;
  Vec3 root_translation{0.0, 0.0, 0.0};

  bool operator==(const SampleCamera&) const = default;
};

struct PoseSample {
  std::string id;
  std::size_t frames = 1;
  std::size_t joints = 0;
  std::vector<double> pose2d;  // frames x joints x 2
  std::vector<double> pose3d;  // joints x 3, millimetres, root-relative
  std::optional<SampleCamera> camera;

  /// Throws ShapeError when the arrays disagree with frames and joints.
  void validate() const;
  Tensor input() const;   // [T, N, 2]
  Pose3d target() const;  // N points
  bool operator==(const PoseSample&) const = default;
};

struct SyntheticConfig {
  std::uint64_t seed = 0;
  std::size_t num_samples = 100;
  std::size_t frames = 1;
  /// Bone length per joint (entry for the root ignored). Empty = layout default.
  std::vector<double> bone_lengths;
  /// Maximum absolute local bend per bone about x and z, radians.
  double max_bend = 0.6;
  /// Maximum per-frame angular step of the random walk for T > 1, radians.
  double walk_step = 0.02;
  /// Root yaw drawn uniformly from [-max_yaw, max_yaw].
  double max_yaw = 3.14159265358979323846;
  CameraModel camera;
  double min_distance = 4000.0;
  double max_distance = 6000.0;
  double max_lateral = 500.0;

  void validate() const;
};

/// Deterministic in cfg.seed. For T > 1 pose3d is the centre frame (index T / 2).
std::vector<PoseSample> generate_synthetic(const SyntheticConfig& cfg, const SkeletonTopology& topo);

/// Default bone lengths (mm) for a layout, indexed by child joint.
std::vector<double> default_bone_lengths(const SkeletonTopology& topo);

/// Negates x of pose2d and pose3d and swaps symmetric joints. Camera metadata
/// is mirrored so that reprojection still holds.
PoseSample horizontal_flip(const PoseSample& sample, const SkeletonTopology& topo);

enum class DatasetFormat { jsonl, bin };

/// `.jsonl` or `.bin`; anything else throws FormatError.
DatasetFormat format_for_path(const std::filesystem::path& path);
DatasetFormat parse_dataset_format(std::string_view s);

/// Values are stored as f32; the JSON-lines format also keeps camera metadata.
std::vector<PoseSample> read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const std::vector<PoseSample>& samples);
void write_dataset(const std::filesystem::path& path, const std::vector<PoseSample>& samples, DatasetFormat format);

/// Rounds every pose value to the nearest f32, as a write/read cycle does.
PoseSample quantize_f32(const PoseSample& sample);

inline constexpr char kDatasetMagic[4] = {'G', 'P', 'S', 'E'};
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

}  // namespace gmlp
