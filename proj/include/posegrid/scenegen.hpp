#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "posegrid/camera.hpp"
#include "posegrid/error.hpp"
#include "posegrid/geometry.hpp"

namespace posegrid {

/// Dense 2D image, row-major, addressed as (u, v) = (column, row).
template <class T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)), fill) {
    require(width >= 0 && height >= 0, ErrorCode::kInvalidArgument, "raster: negative size");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  T& at(int u, int v) { return data_[index(u, v)]; }
  const T& at(int u, int v) const { return data_[index(u, v)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(u);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using DepthImage = Raster<double>;
using LabelImage = Raster<std::int32_t>;

inline constexpr std::int32_t kBackground = -1;

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

struct SceneObject {
  int id = 0;
  Pose pose;
};

struct Scene {
  std::vector<SceneObject> objects;  ///< ids are 0..n-1 in order
  std::shared_ptr<const ObjectModel> model;
  CameraIntrinsics camera;
  std::uint64_t seed = 0;
};

/// Axis-aligned box of object origins, camera frame, meters.
struct BinBounds {
  Vec3 min = Vec3(-0.45, -0.45, 0.8);
  Vec3 max = Vec3(0.45, 0.45, 1.2);
};

/// Checks that the bin lies between the clip planes and that its center is
/// in view. The bin may extend past the image borders laterally.
inline void validate_bounds(const BinBounds& b, const CameraIntrinsics& cam) {
  require(b.min.allFinite() && b.max.allFinite() && (b.min.array() <= b.max.array()).all(),
          ErrorCode::kInvalidArgument, "bin bounds: min must not exceed max");
  std::ostringstream msg;
  msg << "bin bounds: depth range [" << b.min.z() << ", " << b.max.z()
      << "] is outside the clip range [" << cam.near_clip << ", " << cam.far_clip << "]";
  require(b.min.z() >= cam.near_clip && b.max.z() <= cam.far_clip, ErrorCode::kInvalidArgument, msg.str());
  const PixelDepth c = project(0.5 * (b.min + b.max), cam);
  require(c.u >= 0.0 && c.u < cam.width && c.v >= 0.0 && c.v < cam.height, ErrorCode::kInvalidArgument,
          "bin bounds: bin center is not inside the image");
}

/// Deterministic random pile: uniform origins in the bin, uniform rotations.
inline Scene sample_scene(std::uint64_t seed, std::shared_ptr<const ObjectModel> model, int count,
                          const BinBounds& bounds, const CameraIntrinsics& camera) {
  require(model != nullptr, ErrorCode::kInvalidArgument, "sample_scene: model is null");
  require(count >= 0, ErrorCode::kInvalidArgument, "sample_scene: count must be >= 0");
  camera.validate();
  validate_bounds(bounds, camera);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Scene scene;
  scene.model = std::move(model);
  scene.camera = camera;
  scene.seed = seed;
  scene.objects.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Vec3 t;
    for (int a = 0; a < 3; ++a) t[a] = bounds.min[a] + unit(rng) * (bounds.max[a] - bounds.min[a]);
    const Rotation r = uniform_rotation(rng);
    scene.objects.push_back({i, Pose(r, t)});
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

struct RenderResult {
  DepthImage depth;          ///< meters, 0 where nothing was hit
  LabelImage segmentation;   ///< instance id, kBackground where nothing was hit
  std::vector<double> visibility;            ///< visible / in-image alone coverage
  std::vector<double> visibility_unclipped;  ///< visible / full alone coverage
  std::vector<std::size_t> visible_pixels;
  std::vector<std::size_t> alone_pixels;
};

namespace detail {

struct CameraSphere {
  Vec3 center;
  double radius;
  int object;
};

struct PixelRect {
  int u0, v0, u1, v1;  // inclusive-exclusive
  bool unbounded = false;
};

inline std::vector<CameraSphere> camera_spheres(const Pose& pose, const ObjectModel& model, int object) {
  std::vector<CameraSphere> out;
  out.reserve(model.shape_spheres().size());
  for (const Sphere& s : model.shape_spheres()) out.push_back({pose.transform(s.center), s.radius, object});
  return out;
}

// Conservative pixel rectangle from the projected corners of the bounding cube.
inline PixelRect sphere_rect(const CameraSphere& s, const CameraIntrinsics& cam) {
  if (s.center.z() - s.radius <= 1e-6) return {0, 0, 0, 0, true};
  double umin = std::numeric_limits<double>::infinity(), umax = -umin, vmin = umin, vmax = -umin;
  for (int c = 0; c < 8; ++c) {
    const Vec3 p = s.center + s.radius * Vec3(c & 1 ? 1 : -1, c & 2 ? 1 : -1, c & 4 ? 1 : -1);
    const double u = cam.fu * p.x() / p.z() + cam.cu, v = cam.fv * p.y() / p.z() + cam.cv;
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  auto lo = [](double x) { return static_cast<int>(std::max(-1e8, std::floor(x - 0.5))); };
  auto hi = [](double x) { return static_cast<int>(std::min(1e8, std::ceil(x + 0.5))) + 1; };
  return {lo(umin), lo(vmin), hi(umax), hi(vmax)};
}

/// Nearest positive ray parameter for the ray through pixel (u, v) centers;
/// the ray has unit z so the parameter equals depth.
inline double ray_sphere_depth(double u, double v, const CameraSphere& s, const CameraIntrinsics& cam) {
  const Vec3 d((u - cam.cu) / cam.fu, (v - cam.cv) / cam.fv, 1.0);
  const double a = d.squaredNorm();
  const double b = d.dot(s.center);
  const double c = s.center.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - a * c;
  if (disc < 0.0) return 0.0;
  const double root = std::sqrt(disc);
  double t = (b - root) / a;
  if (t <= 0.0) t = (b + root) / a;
  return t > 0.0 ? t : 0.0;
}

}  // namespace detail

struct RenderOptions {
  /// Use the unclipped visibility as the primary `visibility` output.
  bool unclipped_visibility = false;
};

/// Sphere-set z-buffer renderer. Ray through pixel center (u + 0.5, v + 0.5).
inline RenderResult render(const Scene& scene, const RenderOptions& options = {}) {
  const CameraIntrinsics& cam = scene.camera;
  cam.validate();
  require(scene.model != nullptr, ErrorCode::kInvalidArgument, "render: scene has no model");
  const int w = cam.width, h = cam.height;
  const std::size_t n = scene.objects.size();

  RenderResult out;
  out.depth = DepthImage(w, h, 0.0);
  out.segmentation = LabelImage(w, h, kBackground);
  out.visibility.assign(n, 0.0);
  out.visibility_unclipped.assign(n, 0.0);
  out.visible_pixels.assign(n, 0);
  out.alone_pixels.assign(n, 0);
  std::vector<std::size_t> alone_unclipped(n, 0);

  for (std::size_t o = 0; o < n; ++o) {
    const int id = scene.objects[o].id;
    const auto spheres = detail::camera_spheres(scene.objects[o].pose, *scene.model, id);
    if (spheres.empty()) continue;

    // Bounding rectangle of the whole object; unclipped for the alternative visibility.
    detail::PixelRect rect{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(),
                           std::numeric_limits<int>::min(), std::numeric_limits<int>::min()};
    for (const auto& s : spheres) {
      detail::PixelRect r = detail::sphere_rect(s, cam);
      if (r.unbounded) {
        rect.unbounded = true;
        break;
      }
      rect.u0 = std::min(rect.u0, r.u0);
      rect.v0 = std::min(rect.v0, r.v0);
      rect.u1 = std::max(rect.u1, r.u1);
      rect.v1 = std::max(rect.v1, r.v1);
    }
    if (rect.unbounded) rect = {-w, -h, 2 * w, 2 * h};

    for (int v = rect.v0; v < rect.v1; ++v) {
      for (int u = rect.u0; u < rect.u1; ++u) {
        double nearest = 0.0;
        for (const auto& s : spheres) {
          const double t = detail::ray_sphere_depth(u + 0.5, v + 0.5, s, cam);
          if (t > 0.0 && (nearest == 0.0 || t < nearest)) nearest = t;
        }
        if (nearest == 0.0) continue;
        ++alone_unclipped[o];
        if (u < 0 || v < 0 || u >= w || v >= h) continue;
        ++out.alone_pixels[o];
        double& z = out.depth.at(u, v);
        std::int32_t& label = out.segmentation.at(u, v);
        if (z == 0.0 || nearest < z || (nearest == z && id < label)) {
          z = nearest;
          label = id;
        }
      }
    }
  }

  std::vector<std::size_t> index_of_id;
  for (std::size_t o = 0; o < n; ++o) {
    const int id = scene.objects[o].id;
    require(id >= 0, ErrorCode::kInvalidArgument, "render: negative instance id");
    if (index_of_id.size() <= static_cast<std::size_t>(id)) index_of_id.resize(id + 1, n);
    index_of_id[id] = o;
  }
  for (std::int32_t label : out.segmentation.data())
    if (label != kBackground) ++out.visible_pixels[index_of_id[label]];
  for (std::size_t o = 0; o < n; ++o) {
    out.visibility[o] = out.alone_pixels[o] == 0
                            ? 0.0
                            : static_cast<double>(out.visible_pixels[o]) / out.alone_pixels[o];
    out.visibility_unclipped[o] = alone_unclipped[o] == 0
                                      ? 0.0
                                      : static_cast<double>(out.visible_pixels[o]) / alone_unclipped[o];
  }
  if (options.unclipped_visibility) std::swap(out.visibility, out.visibility_unclipped);
  return out;
}

/// Ground-truth record for one object.
struct Annotation {
  int id = 0;
  Pose pose;
  double visibility = 0.0;
};

inline std::vector<Annotation> annotate(const Scene& scene, const RenderResult& rendered) {
  require(rendered.visibility.size() == scene.objects.size(), ErrorCode::kSceneMismatch,
          "annotate: render result does not match the scene");
  std::vector<Annotation> out;
  out.reserve(scene.objects.size());
  for (std::size_t o = 0; o < scene.objects.size(); ++o)
    out.push_back({scene.objects[o].id, scene.objects[o].pose, rendered.visibility[o]});
  return out;
}

// ---------------------------------------------------------------------------
// Depth corruption and hole filling
// ---------------------------------------------------------------------------

struct NoiseConfig {
  double dropout = 0.0;  ///< probability that a pixel is set to 0
  double sigma = 0.0;    ///< Gaussian depth noise, meters
  int blur_radius = 0;   ///< box blur half width, pixels

  bool is_identity() const { return dropout <= 0.0 && sigma <= 0.0 && blur_radius <= 0; }
};

/// Box blur over valid pixels, then Gaussian noise, then dropout.
inline DepthImage corrupt_depth(const DepthImage& depth, const NoiseConfig& config, std::uint64_t seed) {
  require(config.dropout >= 0.0 && config.dropout <= 1.0 && config.sigma >= 0.0 && config.blur_radius >= 0,
          ErrorCode::kInvalidArgument, "corrupt_depth: invalid noise configuration");
  if (config.is_identity()) return depth;
  const int w = depth.width(), h = depth.height();
  DepthImage out = depth;

  if (config.blur_radius > 0) {
    const int r = config.blur_radius;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (depth.at(u, v) == 0.0) continue;
        double sum = 0.0;
        int count = 0;
        for (int dv = -r; dv <= r; ++dv) {
          for (int du = -r; du <= r; ++du) {
            const int uu = u + du, vv = v + dv;
            if (uu < 0 || vv < 0 || uu >= w || vv >= h) continue;
            const double z = depth.at(uu, vv);
            if (z == 0.0) continue;
            sum += z;
            ++count;
          }
        }
        out.at(u, v) = sum / count;
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& z : out.data()) {
    const double n = noise(rng);
    const double drop = unit(rng);
    if (z == 0.0) continue;
    if (config.sigma > 0.0) z = std::max(0.0, z + config.sigma * n);
    if (drop < config.dropout) z = 0.0;
  }
  return out;
}

/// Fills zero pixels by linear interpolation between the nearest valid
/// pixels along the row and the column (weighted by inverse span). Pixels
/// with no bracketing pair use the nearest valid neighbor; repeated until
/// every pixel is filled.
inline DepthImage interpolate_missing(const DepthImage& depth) {
  const int w = depth.width(), h = depth.height();
  require(std::any_of(depth.data().begin(), depth.data().end(), [](double z) { return z != 0.0; }),
          ErrorCode::kInvalidArgument, "interpolate_missing: raster has no valid pixel");
  DepthImage current = depth;
  bool missing = true;
  while (missing) {
    missing = false;
    DepthImage next = current;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (current.at(u, v) != 0.0) continue;
        int left = u - 1, right = u + 1, up = v - 1, down = v + 1;
        while (left >= 0 && current.at(left, v) == 0.0) --left;
        while (right < w && current.at(right, v) == 0.0) ++right;
        while (up >= 0 && current.at(u, up) == 0.0) --up;
        while (down < h && current.at(u, down) == 0.0) ++down;
        double sum = 0.0, weight = 0.0;
        if (left >= 0 && right < w) {
          const double span = right - left;
          const double t = (u - left) / span;
          sum += ((1.0 - t) * current.at(left, v) + t * current.at(right, v)) / span;
          weight += 1.0 / span;
        }
        if (up >= 0 && down < h) {
          const double span = down - up;
          const double t = (v - up) / span;
          sum += ((1.0 - t) * current.at(u, up) + t * current.at(u, down)) / span;
          weight += 1.0 / span;
        }
        if (weight == 0.0) {
          int best = std::numeric_limits<int>::max();
          double value = 0.0;
          auto consider = [&](bool ok, int dist, double z) {
            if (ok && dist < best) {
              best = dist;
              value = z;
            }
          };
          consider(left >= 0, u - left, left >= 0 ? current.at(left, v) : 0.0);
          consider(right < w, right - u, right < w ? current.at(right, v) : 0.0);
          consider(up >= 0, v - up, up >= 0 ? current.at(u, up) : 0.0);
          consider(down < h, down - v, down < h ? current.at(u, down) : 0.0);
          if (best == std::numeric_limits<int>::max()) {
            missing = true;
            continue;
          }
          next.at(u, v) = value;
        } else {
          next.at(u, v) = sum / weight;
        }
      }
    }
    current = std::move(next);
  }
  return current;
}

}  // namespace posegrid
