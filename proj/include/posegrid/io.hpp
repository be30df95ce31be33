#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "posegrid/camera.hpp"
#include "posegrid/codecs.hpp"
#include "posegrid/error.hpp"
#include "posegrid/eval.hpp"
#include "posegrid/geometry.hpp"
#include "posegrid/loss.hpp"
#include "posegrid/postprocess.hpp"
#include "posegrid/scenegen.hpp"

namespace posegrid::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Raw files
// ---------------------------------------------------------------------------

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Writes to a temporary sibling and renames it over `path`.
inline void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename '" + tmp.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// Binary container
//
//   [0, 16)   magic "POSEGRID-TENSOR\0"
//   [16, 20)  format version (u32 LE) = 1
//   [20, 24)  element type (u32 LE): 1 = float32, 2 = int32
//   [24, 64)  reserved, zero
//   [64, 76)  dims d0, d1, d2 (u32 LE)
//   [76, ..)  d0*d1*d2 elements, row-major, 4 bytes LE each
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 16> kTensorMagic = {'P', 'O', 'S', 'E', 'G', 'R', 'I', 'D',
                                                      '-', 'T', 'E', 'N', 'S', 'O', 'R', '\0'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::size_t kHeaderBytes = 64;
inline constexpr std::size_t kPayloadOffset = kHeaderBytes + 12;

enum class ElementType : std::uint32_t { kFloat32 = 1, kInt32 = 2 };

struct RawTensor {
  ElementType type = ElementType::kFloat32;
  std::array<std::uint32_t, 3> dims{};
  std::vector<std::uint32_t> words;  ///< raw 32-bit payload
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
  return v;
}

}  // namespace detail

inline std::string encode_container(const RawTensor& t) {
  const std::size_t count = static_cast<std::size_t>(t.dims[0]) * t.dims[1] * t.dims[2];
  require(count == t.words.size(), ErrorCode::kDimensionMismatch, "tensor container: payload does not match dims");
  std::string out(kTensorMagic.begin(), kTensorMagic.end());
  detail::put_u32(out, kTensorVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(t.type));
  out.resize(kHeaderBytes, '\0');
  for (std::uint32_t d : t.dims) detail::put_u32(out, d);
  out.reserve(kPayloadOffset + 4 * count);
  for (std::uint32_t w : t.words) detail::put_u32(out, w);
  return out;
}

inline RawTensor decode_container(const std::string& bytes, const std::string& source) {
  auto fail = [&](const std::string& field, const std::string& detail) {
    throw Error(ErrorCode::kMalformedFile, "tensor file '" + source + "': " + field + ": " + detail);
  };
  if (bytes.size() < kPayloadOffset) fail("header", "file shorter than 76 bytes");
  if (!std::equal(kTensorMagic.begin(), kTensorMagic.end(), bytes.begin())) fail("magic", "not a posegrid tensor");
  const std::uint32_t version = detail::get_u32(bytes, 16);
  if (version != kTensorVersion) fail("version", std::to_string(version) + " is not supported");
  RawTensor t;
  const std::uint32_t type = detail::get_u32(bytes, 20);
  if (type != 1 && type != 2) fail("element type", std::to_string(type) + " is unknown");
  t.type = static_cast<ElementType>(type);
  for (int d = 0; d < 3; ++d) t.dims[d] = detail::get_u32(bytes, kHeaderBytes + 4 * d);
  const unsigned long long count = 1ULL * t.dims[0] * t.dims[1] * t.dims[2];
  const unsigned long long expected = kPayloadOffset + 4ULL * count;
  if (bytes.size() != expected)
    fail("payload length", std::to_string(bytes.size() - kPayloadOffset) + " bytes, expected " +
                               std::to_string(4ULL * count));
  t.words.resize(count);
  for (std::size_t i = 0; i < count; ++i) t.words[i] = detail::get_u32(bytes, kPayloadOffset + 4 * i);
  return t;
}

/// Values are stored as float32.
inline std::string serialize_tensor(const OutputTensor& tensor) {
  RawTensor raw;
  raw.type = ElementType::kFloat32;
  raw.dims = {tensor.sx(), tensor.sy(), tensor.channels()};
  raw.words.reserve(tensor.size());
  for (double v : tensor.data()) raw.words.push_back(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return encode_container(raw);
}

inline OutputTensor deserialize_tensor(const std::string& bytes, const std::string& source) {
  const RawTensor raw = decode_container(bytes, source);
  if (raw.type != ElementType::kFloat32)
    throw Error(ErrorCode::kMalformedFile, "tensor file '" + source + "': element type: expected float32");
  OutputTensor t(raw.dims[0], raw.dims[1], raw.dims[2]);
  auto data = t.data();
  for (std::size_t i = 0; i < raw.words.size(); ++i) data[i] = std::bit_cast<float>(raw.words[i]);
  return t;
}

inline void save_tensor(const fs::path& path, const OutputTensor& tensor) {
  write_file_atomic(path, serialize_tensor(tensor));
}

inline OutputTensor load_tensor(const fs::path& path) { return deserialize_tensor(read_file(path), path.string()); }

/// Rasters use dims (width, height, 1), i.e. index u * height + v.
inline void save_depth(const fs::path& path, const DepthImage& depth) {
  RawTensor raw;
  raw.type = ElementType::kFloat32;
  raw.dims = {static_cast<std::uint32_t>(depth.width()), static_cast<std::uint32_t>(depth.height()), 1};
  for (int u = 0; u < depth.width(); ++u)
    for (int v = 0; v < depth.height(); ++v)
      raw.words.push_back(std::bit_cast<std::uint32_t>(static_cast<float>(depth.at(u, v))));
  write_file_atomic(path, encode_container(raw));
}

inline void save_labels(const fs::path& path, const LabelImage& labels) {
  RawTensor raw;
  raw.type = ElementType::kInt32;
  raw.dims = {static_cast<std::uint32_t>(labels.width()), static_cast<std::uint32_t>(labels.height()), 1};
  for (int u = 0; u < labels.width(); ++u)
    for (int v = 0; v < labels.height(); ++v) raw.words.push_back(std::bit_cast<std::uint32_t>(labels.at(u, v)));
  write_file_atomic(path, encode_container(raw));
}

namespace detail {

inline RawTensor load_raster(const fs::path& path, ElementType type) {
  RawTensor raw = decode_container(read_file(path), path.string());
  if (raw.type != type)
    throw Error(ErrorCode::kMalformedFile, "raster file '" + path.string() + "': element type: unexpected");
  if (raw.dims[2] != 1)
    throw Error(ErrorCode::kMalformedFile, "raster file '" + path.string() + "': dims: third dim must be 1");
  return raw;
}

}  // namespace detail

inline DepthImage load_depth(const fs::path& path) {
  const RawTensor raw = detail::load_raster(path, ElementType::kFloat32);
  DepthImage out(static_cast<int>(raw.dims[0]), static_cast<int>(raw.dims[1]));
  std::size_t n = 0;
  for (int u = 0; u < out.width(); ++u)
    for (int v = 0; v < out.height(); ++v) out.at(u, v) = std::bit_cast<float>(raw.words[n++]);
  return out;
}

inline LabelImage load_labels(const fs::path& path) {
  const RawTensor raw = detail::load_raster(path, ElementType::kInt32);
  LabelImage out(static_cast<int>(raw.dims[0]), static_cast<int>(raw.dims[1]));
  std::size_t n = 0;
  for (int u = 0; u < out.width(); ++u)
    for (int v = 0; v < out.height(); ++v) out.at(u, v) = std::bit_cast<std::int32_t>(raw.words[n++]);
  return out;
}

// ---------------------------------------------------------------------------
// JSON field access
// ---------------------------------------------------------------------------

/// Reads `key` from a JSON object and reports the full field path on error.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail("", "expected an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }
  const json& raw(const std::string& key) const {
    if (!node_.contains(key)) fail(key, "missing");
    return node_.at(key);
  }
  Reader child(const std::string& key) const { return Reader(raw(key), field(key)); }

  template <class T>
  T get(const std::string& key) const {
    try {
      return raw(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(key, "has the wrong type");
    }
  }

  template <class T>
  T get_or(const std::string& key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  Vec3 vec3(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); }))
      fail(key, "expected an array of 3 numbers");
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  }

  /// Rejects keys outside `allowed`.
  void only(std::initializer_list<const char*> allowed) const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) fail(it.key(), "unknown field");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw Error(ErrorCode::kMalformedFile, "field '" + field(key) + "' " + what);
  }

 private:
  const json& node_;
  std::string path_;
};

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json to_json(const CameraIntrinsics& c) {
  return {{"fu", c.fu}, {"fv", c.fv}, {"cu", c.cu}, {"cv", c.cv}, {"width", c.width},
          {"height", c.height}, {"near", c.near_clip}, {"far", c.far_clip}};
}

inline CameraIntrinsics camera_from_json(const Reader& r) {
  r.only({"fu", "fv", "cu", "cv", "width", "height", "near", "far"});
  CameraIntrinsics c;
  c.fu = r.get_or("fu", c.fu);
  c.fv = r.get_or("fv", c.fv);
  c.cu = r.get_or("cu", c.cu);
  c.cv = r.get_or("cv", c.cv);
  c.width = r.get_or("width", c.width);
  c.height = r.get_or("height", c.height);
  c.near_clip = r.get_or("near", c.near_clip);
  c.far_clip = r.get_or("far", c.far_clip);
  try {
    c.validate();
  } catch (const Error& e) {
    r.fail("", e.what());
  }
  return c;
}

inline json to_json(const GridSpec& g) {
  return {{"variant", to_string(g.variant)}, {"sx", g.sx}, {"sy", g.sy}, {"sz", g.sz}, {"poses", g.poses}};
}

inline GridSpec grid_from_json(const Reader& r, Variant variant) {
  r.only({"variant", "sx", "sy", "sz", "poses"});
  if (r.has("variant") && r.get<std::string>("variant") != to_string(variant)) r.fail("variant", "does not match");
  GridSpec g = GridSpec::defaults(variant);
  g.sx = r.get_or("sx", g.sx);
  g.sy = r.get_or("sy", g.sy);
  g.sz = r.get_or("sz", g.sz);
  g.poses = r.get_or("poses", g.poses);
  try {
    g.validate();
  } catch (const Error& e) {
    r.fail("", e.what());
  }
  return g;
}

inline json symmetry_to_json(const SymmetrySpec& s) {
  if (s.kind() == SymmetryKind::kRevolution) return "revolution:" + std::to_string(s.revolution_samples());
  return to_string(s);
}

inline json to_json(const ModelDefinition& def, const ObjectModel& built) {
  json spheres = json::array();
  for (const Sphere& s : def.spheres) spheres.push_back({s.center.x(), s.center.y(), s.center.z(), s.radius});
  json extra = json::array();
  for (const Vec3& p : built.additional_points()) extra.push_back(to_json(p));
  return {{"name", def.name}, {"symmetry", symmetry_to_json(def.symmetry)}, {"spheres", spheres},
          {"additional_points", extra}};
}

/// Accepts a preset name or {"name", "symmetry", "spheres", "additional_points"}.
inline ModelDefinition model_from_json(const json& node, const std::string& path) {
  if (node.is_string()) {
    try {
      return preset_model(node.get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedFile, "field '" + path + "' " + e.what());
    }
  }
  const Reader r(node, path);
  r.only({"name", "preset", "symmetry", "spheres", "additional_points"});
  ModelDefinition def;
  if (r.has("preset")) {
    def = model_from_json(r.raw("preset"), r.field("preset"));
  }
  def.name = r.get_or<std::string>("name", def.name);
  if (r.has("symmetry")) {
    try {
      def.symmetry = parse_symmetry(r.get<std::string>("symmetry"));
    } catch (const Error& e) {
      r.fail("symmetry", e.what());
    }
  }
  if (r.has("spheres")) {
    def.spheres.clear();
    const json& arr = r.raw("spheres");
    if (!arr.is_array()) r.fail("spheres", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const json& s = arr[i];
      if (!s.is_array() || s.size() != 4) r.fail("spheres[" + std::to_string(i) + "]", "expected [x, y, z, r]");
      def.spheres.push_back({Vec3(s[0].get<double>(), s[1].get<double>(), s[2].get<double>()), s[3].get<double>()});
    }
  }
  if (r.has("additional_points")) {
    std::vector<Vec3> pts;
    const json& arr = r.raw("additional_points");
    if (!arr.is_array()) r.fail("additional_points", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const json& p = arr[i];
      if (!p.is_array() || p.size() != 3)
        r.fail("additional_points[" + std::to_string(i) + "]", "expected [x, y, z]");
      pts.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
    def.additional_points = std::move(pts);
  }
  if (def.spheres.empty()) r.fail("spheres", "missing or empty");
  return def;
}

inline std::shared_ptr<const ObjectModel> build_model_checked(const ModelDefinition& def, const std::string& path) {
  try {
    return std::make_shared<const ObjectModel>(build_model(def));
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedFile, "field '" + path + "' " + e.what());
  }
}

inline json to_json(const Pose& p) {
  const Eigen::Quaterniond& q = p.rotation().quaternion();
  return {{"quaternion", {q.w(), q.x(), q.y(), q.z()}}, {"translation", to_json(p.translation())}};
}

inline Pose pose_from_json(const Reader& r) {
  const json& q = r.raw("quaternion");
  if (!q.is_array() || q.size() != 4 || !std::all_of(q.begin(), q.end(), [](const json& x) { return x.is_number(); }))
    r.fail("quaternion", "expected [w, x, y, z]");
  const Eigen::Quaterniond quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
  if (!std::isfinite(quat.norm()) || std::abs(quat.norm() - 1.0) > 1e-6) r.fail("quaternion", "is not a unit quaternion");
  const Vec3 t = r.vec3("translation");
  if (!t.allFinite()) r.fail("translation", "is not finite");
  return Pose(Rotation(quat), t);
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  CameraIntrinsics camera;
  ModelDefinition model = preset_model("brick");
  BinBounds bin;
  int min_objects = 5;
  int max_objects = 30;
  std::map<Variant, GridSpec> grids;
  double decode_threshold = 0.5;
  LossWeights loss;
  double eps_fraction = 0.1;
  std::optional<double> eps;  ///< meters; overrides eps_fraction
  std::size_t min_points = 1;
  double confidence_threshold = 0.0;
  EvalConfig eval;
  NoiseConfig noise;

  ExperimentConfig() {
    for (Variant v : kAllVariants) grids[v] = GridSpec::defaults(v);
  }

  GridSpec grid(Variant v) const { return grids.at(v); }

  ClusterParams cluster_params(const ObjectModel& m) const {
    ClusterParams p = ClusterParams::for_model(m, eps_fraction);
    if (eps) p.eps = *eps;
    p.min_points = min_points;
    p.confidence_threshold = confidence_threshold;
    return p;
  }
};

inline json to_json(const ExperimentConfig& c) {
  json grids = json::object();
  for (const auto& [v, g] : c.grids) grids[to_string(v)] = {{"sx", g.sx}, {"sy", g.sy}, {"sz", g.sz}, {"poses", g.poses}};
  json cluster = {{"eps_fraction", c.eps_fraction}, {"min_points", c.min_points},
                  {"confidence_threshold", c.confidence_threshold}};
  if (c.eps) cluster["eps"] = *c.eps;
  const ObjectModel built = build_model(c.model);
  return {{"camera", to_json(c.camera)},
          {"model", to_json(c.model, built)},
          {"bin", {{"min", to_json(c.bin.min)}, {"max", to_json(c.bin.max)}}},
          {"objects_per_scene", {c.min_objects, c.max_objects}},
          {"grids", grids},
          {"decode_threshold", c.decode_threshold},
          {"loss",
           {{"lambda1", c.loss.lambda1},
            {"lambda2", c.loss.lambda2},
            {"lambda3", c.loss.lambda3_scale},
            {"lambda3_mode", to_string(c.loss.lambda3_mode)},
            {"lambda4", c.loss.lambda4}}},
          {"cluster", cluster},
          {"eval", {{"visibility_cutoff", c.eval.visibility_cutoff}, {"radius_fraction", c.eval.radius_fraction}}},
          {"noise", {{"dropout", c.noise.dropout}, {"sigma", c.noise.sigma}, {"blur_radius", c.noise.blur_radius}}}};
}

inline ExperimentConfig config_from_json(const json& node) {
  const Reader r(node, "");
  r.only({"camera", "model", "bin", "objects_per_scene", "grids", "decode_threshold", "loss", "cluster", "eval",
          "noise"});
  ExperimentConfig c;
  if (r.has("camera")) c.camera = camera_from_json(r.child("camera"));
  if (r.has("model")) c.model = model_from_json(r.raw("model"), "model");
  if (r.has("bin")) {
    const Reader b = r.child("bin");
    b.only({"min", "max"});
    c.bin.min = b.vec3("min");
    c.bin.max = b.vec3("max");
  }
  if (r.has("objects_per_scene")) {
    const json& range = r.raw("objects_per_scene");
    if (!range.is_array() || range.size() != 2 || !range[0].is_number_integer() || !range[1].is_number_integer())
      r.fail("objects_per_scene", "expected [min, max]");
    c.min_objects = range[0].get<int>();
    c.max_objects = range[1].get<int>();
    if (c.min_objects < 0 || c.max_objects < c.min_objects) r.fail("objects_per_scene", "expected 0 <= min <= max");
  }
  if (r.has("grids")) {
    const Reader g = r.child("grids");
    g.only({"vanilla", "eve", "ap", "z", "mp", "si"});
    for (Variant v : kAllVariants)
      if (g.has(to_string(v))) c.grids[v] = grid_from_json(g.child(to_string(v)), v);
  }
  c.decode_threshold = r.get_or("decode_threshold", c.decode_threshold);
  if (!(c.decode_threshold >= 0.0 && c.decode_threshold <= 1.0)) r.fail("decode_threshold", "must lie in [0, 1]");
  if (r.has("loss")) {
    const Reader l = r.child("loss");
    l.only({"lambda1", "lambda2", "lambda3", "lambda3_mode", "lambda4"});
    c.loss.lambda1 = l.get_or("lambda1", c.loss.lambda1);
    c.loss.lambda2 = l.get_or("lambda2", c.loss.lambda2);
    c.loss.lambda3_scale = l.get_or("lambda3", c.loss.lambda3_scale);
    c.loss.lambda4 = l.get_or("lambda4", c.loss.lambda4);
    if (l.has("lambda3_mode")) {
      try {
        c.loss.lambda3_mode = parse_lambda3_mode(l.get<std::string>("lambda3_mode"));
      } catch (const Error& e) {
        l.fail("lambda3_mode", e.what());
      }
    }
  }
  if (r.has("cluster")) {
    const Reader k = r.child("cluster");
    k.only({"eps", "eps_fraction", "min_points", "confidence_threshold"});
    c.eps_fraction = k.get_or("eps_fraction", c.eps_fraction);
    if (k.has("eps")) c.eps = k.get<double>("eps");
    c.min_points = k.get_or("min_points", c.min_points);
    c.confidence_threshold = k.get_or("confidence_threshold", c.confidence_threshold);
  }
  if (r.has("eval")) {
    const Reader e = r.child("eval");
    e.only({"visibility_cutoff", "radius_fraction"});
    c.eval.visibility_cutoff = e.get_or("visibility_cutoff", c.eval.visibility_cutoff);
    c.eval.radius_fraction = e.get_or("radius_fraction", c.eval.radius_fraction);
  }
  if (r.has("noise")) {
    const Reader n = r.child("noise");
    n.only({"dropout", "sigma", "blur_radius"});
    c.noise.dropout = n.get_or("dropout", c.noise.dropout);
    c.noise.sigma = n.get_or("sigma", c.noise.sigma);
    c.noise.blur_radius = n.get_or("blur_radius", c.noise.blur_radius);
  }
  try {
    build_model(c.model);
    validate_bounds(c.bin, c.camera);
    c.eval.validate();
    c.cluster_params(build_model(c.model)).validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("config: ") + e.what());
  }
  return c;
}

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformedFile, "'" + source + "' is not valid JSON: " + e.what());
  }
}

inline ExperimentConfig load_config(const fs::path& path) {
  const json node = parse_json(read_file(path), path.string());
  try {
    return config_from_json(node);
  } catch (const Error& e) {
    throw Error(e.code(), "config '" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Scene files
// ---------------------------------------------------------------------------

inline constexpr const char* kSceneFormat = "posegrid-scene";
inline constexpr const char* kSceneVersion = "1.0";

struct SceneRecord {
  std::string scene_id;
  std::uint64_t seed = 0;
  CameraIntrinsics camera;
  ModelDefinition model_definition;
  std::shared_ptr<const ObjectModel> model;
  std::map<Variant, GridSpec> grids;
  std::vector<Annotation> annotations;
  DepthImage depth;
  LabelImage segmentation;

  /// Render result rebuilt from the stored rasters and visibilities.
  RenderResult render_result() const {
    RenderResult r;
    r.depth = depth;
    r.segmentation = segmentation;
    r.visibility.assign(annotations.size(), 0.0);
    for (const Annotation& a : annotations) r.visibility[a.id] = a.visibility;
    r.visibility_unclipped = r.visibility;
    return r;
  }

  std::vector<GroundTruth> ground_truth() const {
    std::vector<GroundTruth> out;
    for (const Annotation& a : annotations) out.push_back({a.pose, a.visibility});
    return out;
  }
};

/// Writes <dir>/<id>.json with rasters <id>.depth.bin and <id>.seg.bin.
inline void save_scene(const fs::path& dir, const SceneRecord& s) {
  json objects = json::array();
  for (const Annotation& a : s.annotations) {
    json o = to_json(a.pose);
    o["id"] = a.id;
    o["visibility"] = a.visibility;
    objects.push_back(o);
  }
  json grids = json::object();
  for (const auto& [v, g] : s.grids) grids[to_string(v)] = to_json(g);
  const std::string depth_name = s.scene_id + ".depth.bin";
  const std::string seg_name = s.scene_id + ".seg.bin";
  const json doc = {{"format", kSceneFormat},
                    {"version", kSceneVersion},
                    {"scene_id", s.scene_id},
                    {"seed", s.seed},
                    {"camera", to_json(s.camera)},
                    {"model", to_json(s.model_definition, *s.model)},
                    {"grids", grids},
                    {"objects", objects},
                    {"rasters", {{"depth", depth_name}, {"segmentation", seg_name}}}};
  save_depth(dir / depth_name, s.depth);
  save_labels(dir / seg_name, s.segmentation);
  write_file_atomic(dir / (s.scene_id + ".json"), doc.dump(2) + "\n");
}

inline SceneRecord load_scene(const fs::path& path) {
  const json doc = parse_json(read_file(path), path.string());
  try {
    const Reader r(doc, "");
    if (r.get<std::string>("format") != kSceneFormat) r.fail("format", "is not " + std::string(kSceneFormat));
    if (r.get<std::string>("version") != kSceneVersion) r.fail("version", "is not supported");
    SceneRecord s;
    s.scene_id = r.get<std::string>("scene_id");
    s.seed = r.get<std::uint64_t>("seed");
    s.camera = camera_from_json(r.child("camera"));
    s.model_definition = model_from_json(r.raw("model"), "model");
    s.model = build_model_checked(s.model_definition, "model");
    const Reader g = r.child("grids");
    for (Variant v : kAllVariants) {
      s.grids[v] = g.has(to_string(v)) ? grid_from_json(g.child(to_string(v)), v) : GridSpec::defaults(v);
    }
    const json& objects = r.raw("objects");
    if (!objects.is_array()) r.fail("objects", "expected an array");
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const Reader o(objects[i], "objects[" + std::to_string(i) + "]");
      Annotation a;
      a.id = o.get<int>("id");
      if (a.id != static_cast<int>(i)) o.fail("id", "must equal the object index");
      a.pose = pose_from_json(o);
      a.visibility = o.get<double>("visibility");
      if (!(a.visibility >= 0.0 && a.visibility <= 1.0)) o.fail("visibility", "must lie in [0, 1]");
      s.annotations.push_back(a);
    }
    const Reader rasters = r.child("rasters");
    const fs::path dir = path.parent_path();
    s.depth = load_depth(dir / rasters.get<std::string>("depth"));
    s.segmentation = load_labels(dir / rasters.get<std::string>("segmentation"));
    if (s.depth.width() != s.camera.width || s.depth.height() != s.camera.height ||
        s.segmentation.width() != s.camera.width || s.segmentation.height() != s.camera.height)
      throw Error(ErrorCode::kDimensionMismatch, "raster size does not match camera.width x camera.height");
    return s;
  } catch (const Error& e) {
    throw Error(e.code(), "scene '" + path.string() + "': " + e.what());
  }
}

/// Scene files in a directory, sorted by name.
inline std::vector<fs::path> list_files(const fs::path& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kMissingFile, "'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<fs::path> list_scene_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const fs::path& p : list_files(dir, ".json"))
    if (p.filename() != "manifest.json") out.push_back(p);
  return out;
}

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

inline constexpr const char* kPredictionsFormat = "posegrid-predictions";

struct ScenePredictions {
  std::string scene_id;
  std::vector<FinalPrediction> predictions;
};

inline json predictions_to_json(const std::vector<ScenePredictions>& scenes, const json& meta) {
  json arr = json::array();
  for (const ScenePredictions& s : scenes) {
    json preds = json::array();
    for (const FinalPrediction& p : s.predictions) {
      json o = to_json(p.pose);
      o["confidence"] = p.confidence;
      o["support"] = p.support;
      preds.push_back(o);
    }
    arr.push_back({{"scene_id", s.scene_id}, {"predictions", preds}});
  }
  json doc = meta;
  doc["format"] = kPredictionsFormat;
  doc["version"] = kSceneVersion;
  doc["scenes"] = arr;
  return doc;
}

inline std::vector<ScenePredictions> load_predictions(const fs::path& path) {
  const json doc = parse_json(read_file(path), path.string());
  try {
    const Reader r(doc, "");
    if (r.get<std::string>("format") != kPredictionsFormat) r.fail("format", "is not " + std::string(kPredictionsFormat));
    std::vector<ScenePredictions> out;
    const json& scenes = r.raw("scenes");
    if (!scenes.is_array()) r.fail("scenes", "expected an array");
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const Reader s(scenes[i], "scenes[" + std::to_string(i) + "]");
      ScenePredictions sp;
      sp.scene_id = s.get<std::string>("scene_id");
      const json& preds = s.raw("predictions");
      if (!preds.is_array()) s.fail("predictions", "expected an array");
      for (std::size_t k = 0; k < preds.size(); ++k) {
        const Reader p(preds[k], s.field("predictions[" + std::to_string(k) + "]"));
        FinalPrediction fp;
        fp.pose = pose_from_json(p);
        fp.confidence = p.get<double>("confidence");
        if (!(fp.confidence >= 0.0 && fp.confidence <= 1.0)) p.fail("confidence", "must lie in [0, 1]");
        fp.support = p.get_or<std::size_t>("support", 1);
        sp.predictions.push_back(std::move(fp));
      }
      out.push_back(std::move(sp));
    }
    return out;
  } catch (const Error& e) {
    throw Error(e.code(), "predictions '" + path.string() + "': " + e.what());
  }
}

}  // namespace posegrid::io
