#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "gmlp/data.hpp"
#include "gmlp/error.hpp"

namespace gmlp {

DatasetFormat format_for_path(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".jsonl") return DatasetFormat::jsonl;
  if (ext == ".bin") return DatasetFormat::bin;
  throw FormatError("cannot infer dataset format from '" + path.string() + "' (expected .jsonl or .bin)");
}

DatasetFormat parse_dataset_format(std::string_view s) {
  if (s == "jsonl") return DatasetFormat::jsonl;
  if (s == "bin") return DatasetFormat::bin;
  throw ValidationError("unknown dataset format '" + std::string(s) + "' (expected jsonl or bin)");
}

namespace {

std::vector<double> as_f32(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

nlohmann::json sample_to_json(const PoseSample& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["frames"] = s.frames;
  j["joints"] = s.joints;
  j["pose2d"] = as_f32(s.pose2d);
  j["pose3d"] = as_f32(s.pose3d);
  if (s.camera) {
    const CameraModel& c = s.camera->intrinsics;
    j["camera"] = {{"focal", c.focal},
                   {"cx", c.cx},
                   {"cy", c.cy},
                   {"width", c.width},
                   {"height", c.height},
                   {"units", std::string(to_string(c.units))},
                   {"root_translation", s.camera->root_translation}};
  }
  return j;
}

PoseSample sample_from_json(const nlohmann::json& j) {
  PoseSample s;
  s.id = j.at("id").get<std::string>();
  s.frames = j.at("frames").get<std::size_t>();
  s.joints = j.at("joints").get<std::size_t>();
  s.pose2d = as_f32(j.at("pose2d").get<std::vector<double>>());
  s.pose3d = as_f32(j.at("pose3d").get<std::vector<double>>());
  if (j.contains("camera")) {
    const auto& c = j.at("camera");
    SampleCamera cam;
    cam.intrinsics.focal = c.at("focal").get<double>();
    cam.intrinsics.cx = c.at("cx").get<double>();
    cam.intrinsics.cy = c.at("cy").get<double>();
    cam.intrinsics.width = c.at("width").get<double>();
    cam.intrinsics.height = c.at("height").get<double>();
    cam.intrinsics.units = parse_image_units(c.at("units").get<std::string>());
    cam.root_translation = c.at("root_translation").get<Vec3>();
    s.camera = cam;
  }
  return s;
}

std::vector<PoseSample> read_jsonl(std::istream& in, const std::string& name) {
  std::vector<PoseSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = name + ":" + std::to_string(line_no) + " (sample " + std::to_string(out.size()) + ")";
    try {
      out.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    } catch (const ValidationError& e) {
      throw FormatError(where + ": " + e.what());
    }
    try {
      out.back().validate();
    } catch (const ShapeError& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(std::ostream& out, const std::vector<PoseSample>& samples) {
  for (const PoseSample& s : samples) out << sample_to_json(s).dump() << '\n';
}

std::vector<PoseSample> read_bin(std::istream& in, std::uint64_t file_size) {
  detail::BinaryReader r(in);
  r.set_context("in dataset header");
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kDatasetMagic)) throw FormatError("dataset: bad magic (expected GPSE)");
  const std::uint32_t version = r.u32();
  if (version != kDatasetFormatVersion) {
    throw FormatError("dataset: unsupported format version " + std::to_string(version) + " (expected " +
                      std::to_string(kDatasetFormatVersion) + ")");
  }
  const std::uint64_t count = r.u64();
  std::uint64_t consumed = 16;
  std::vector<PoseSample> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string where = "in sample " + std::to_string(i);
    r.set_context(where);
    PoseSample s;
    s.id = r.str();
    s.frames = r.u32();
    s.joints = r.u32();
    consumed += 12 + s.id.size();
    const std::uint64_t values = static_cast<std::uint64_t>(s.frames) * s.joints * 2 + static_cast<std::uint64_t>(s.joints) * 3;
    if (s.frames == 0 || s.joints == 0) throw FormatError("dataset: zero frames or joints " + where);
    if (consumed + values * 4 > file_size) throw FormatError("dataset: truncated payload " + where);
    s.pose2d.resize(s.frames * s.joints * 2);
    s.pose3d.resize(s.joints * 3);
    for (double& v : s.pose2d) v = r.f32();
    for (double& v : s.pose3d) v = r.f32();
    consumed += values * 4;
    out.push_back(std::move(s));
  }
  if (!r.at_eof()) throw FormatError("dataset: trailing bytes after " + std::to_string(count) + " samples");
  return out;
}

void write_bin(std::ostream& out, const std::vector<PoseSample>& samples) {
  detail::BinaryWriter w(out);
  w.bytes(kDatasetMagic, 4);
  w.u32(kDatasetFormatVersion);
  w.u64(samples.size());
  for (const PoseSample& s : samples) {
    w.str(s.id);
    w.u32(static_cast<std::uint32_t>(s.frames));
    w.u32(static_cast<std::uint32_t>(s.joints));
    for (double v : s.pose2d) w.f32(static_cast<float>(v));
    for (double v : s.pose3d) w.f32(static_cast<float>(v));
  }
}

}  // namespace

std::vector<PoseSample> read_dataset(const std::filesystem::path& path) {
  const DatasetFormat format = format_for_path(path);
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot open dataset " + path.string() + ": " + ec.message());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  if (size == 0) return {};
  return format == DatasetFormat::jsonl ? read_jsonl(in, path.string()) : read_bin(in, size);
}

void write_dataset(const std::filesystem::path& path, const std::vector<PoseSample>& samples) {
  write_dataset(path, samples, format_for_path(path));
}

void write_dataset(const std::filesystem::path& path, const std::vector<PoseSample>& samples, DatasetFormat format) {
  for (const PoseSample& s : samples) s.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset " + path.string());
  if (format == DatasetFormat::jsonl) {
    write_jsonl(out, samples);
  } else {
    write_bin(out, samples);
  }
  out.flush();
  if (!out) throw IoError("failed writing dataset " + path.string());
}

}  // namespace gmlp
