#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include "posegrid/error.hpp"
#include "posegrid/geometry.hpp"

namespace posegrid {

/// Pinhole camera with depth clipping planes.
struct CameraIntrinsics {
  double fu = 140.0;  ///< focal length, pixels
  double fv = 140.0;
  double cu = 64.0;   ///< principal point, pixels
  double cv = 64.0;
  int width = 128;
  int height = 128;
  double near_clip = 0.5;  ///< meters
  double far_clip = 1.5;

  void validate() const {
    require(std::isfinite(fu) && fu > 0.0 && std::isfinite(fv) && fv > 0.0,
            ErrorCode::kInvalidArgument, "camera: focal lengths must be positive");
    require(std::isfinite(cu) && std::isfinite(cv), ErrorCode::kInvalidArgument,
            "camera: principal point must be finite");
    require(width >= 1 && height >= 1, ErrorCode::kInvalidArgument,
            "camera: image size must be at least 1x1");
    require(std::isfinite(near_clip) && std::isfinite(far_clip) && near_clip > 0.0 &&
                near_clip < far_clip,
            ErrorCode::kInvalidArgument, "camera: require 0 < near < far");
  }

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

// ---------------------------------------------------------------------------
// Output grid
// ---------------------------------------------------------------------------

/// Output parameterization.
enum class Variant { kVanilla, kEve, kAdditionalPoints, kZ, kMultiPose, kSegmentation };

inline constexpr std::array<Variant, 6> kAllVariants = {
    Variant::kVanilla, Variant::kEve,       Variant::kAdditionalPoints,
    Variant::kZ,       Variant::kMultiPose, Variant::kSegmentation};

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::kVanilla: return "vanilla";
    case Variant::kEve: return "eve";
    case Variant::kAdditionalPoints: return "ap";
    case Variant::kZ: return "z";
    case Variant::kMultiPose: return "mp";
    case Variant::kSegmentation: return "si";
  }
  return "vanilla";
}

inline Variant parse_variant(const std::string& name) {
  for (Variant v : kAllVariants)
    if (name == to_string(v)) return v;
  throw Error(ErrorCode::kInvalidArgument, "unknown variant '" + name + "'");
}

/// Variants whose positions are expressed in the diameter-enlarged image frame.
inline bool uses_enlarged_reference(Variant v) {
  return v == Variant::kEve || v == Variant::kAdditionalPoints || v == Variant::kSegmentation;
}

inline constexpr std::uint32_t kFeatureSize = 8;

/// Offsets inside one feature vector [p, v, x, y, z, a1, a2, a3].
enum Feature : std::uint32_t {
  kPresence = 0,
  kVisibility = 1,
  kPosX = 2,
  kPosY = 3,
  kPosZ = 4,
  kAngle1 = 5,
  kAngle2 = 6,
  kAngle3 = 7,
};

struct GridSpec {
  Variant variant = Variant::kVanilla;
  std::uint32_t sx = 16;
  std::uint32_t sy = 16;
  std::uint32_t sz = 1;     ///< depth slices (Z variant)
  std::uint32_t poses = 1;  ///< poses per location (MP variant)

  static GridSpec defaults(Variant v) {
    switch (v) {
      case Variant::kZ: return {v, 16, 16, 16, 1};
      case Variant::kMultiPose: return {v, 8, 8, 1, 3};
      case Variant::kSegmentation: return {v, 32, 32, 1, 1};
      default: return {v, 16, 16, 1, 1};
    }
  }

  /// Feature-vector blocks per spatial location.
  std::uint32_t blocks() const { return sz * poses; }
  std::uint32_t channels() const { return kFeatureSize * blocks(); }
  std::size_t cell_count() const { return static_cast<std::size_t>(sx) * sy * sz * poses; }

  void validate() const {
    require(sx >= 1 && sy >= 1 && sz >= 1 && poses >= 1, ErrorCode::kInvalidArgument,
            "grid: sx, sy, sz and poses must be >= 1");
    if (variant != Variant::kZ)
      require(sz == 1, ErrorCode::kInvalidArgument,
              std::string("grid: variant ") + to_string(variant) + " requires sz = 1");
    if (variant != Variant::kMultiPose)
      require(poses == 1, ErrorCode::kInvalidArgument,
              std::string("grid: variant ") + to_string(variant) + " requires poses = 1");
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Cell index plus the normalized position inside the cell.
struct CellCoords {
  int i = 0;
  int j = 0;
  int k = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

inline PixelDepth project(const Vec3& point, const CameraIntrinsics& cam) {
  if (!(point.z() > 0.0)) {
    std::ostringstream msg;
    msg << "project: point is behind the camera (z = " << point.z() << ")";
    throw Error(ErrorCode::kBehindCamera, msg.str());
  }
  return {cam.fu * point.x() / point.z() + cam.cu, cam.fv * point.y() / point.z() + cam.cv,
          point.z()};
}

inline Vec3 backproject(double u, double v, double depth, const CameraIntrinsics& cam) {
  if (!(depth > 0.0)) {
    std::ostringstream msg;
    msg << "backproject: depth must be positive (depth = " << depth << ")";
    throw Error(ErrorCode::kBehindCamera, msg.str());
  }
  return {(u - cam.cu) / cam.fu * depth, (v - cam.cv) / cam.fv * depth, depth};
}

enum class CellStatus { kInside, kOutOfImage, kOutOfFrustum, kBehindCamera };

struct CellLookup {
  CellStatus status = CellStatus::kInside;
  CellCoords cell;
  PixelDepth pixel;
};

namespace detail {

// Splits scaled coordinate s in [0, count] into an index and a fraction;
// the upper boundary is folded into the last cell.
inline void split_cell(double s, std::uint32_t count, int& index, double& fraction) {
  double whole = std::floor(s);
  if (whole >= static_cast<double>(count)) whole = static_cast<double>(count) - 1.0;
  if (whole < 0.0) whole = 0.0;
  index = static_cast<int>(whole);
  fraction = std::clamp(s - whole, 0.0, 1.0);
}

}  // namespace detail

/// Non-throwing variant of cell_of.
inline CellLookup locate_cell(const Vec3& point, const CameraIntrinsics& cam, const GridSpec& grid) {
  CellLookup out;
  if (!(point.z() > 0.0)) {
    out.status = CellStatus::kBehindCamera;
    out.pixel.depth = point.z();
    return out;
  }
  out.pixel = project(point, cam);
  const double w = cam.width, h = cam.height;
  if (!(out.pixel.u >= 0.0 && out.pixel.u < w && out.pixel.v >= 0.0 && out.pixel.v < h)) {
    out.status = CellStatus::kOutOfImage;
    return out;
  }
  if (!(out.pixel.depth >= cam.near_clip && out.pixel.depth <= cam.far_clip)) {
    out.status = CellStatus::kOutOfFrustum;
    return out;
  }
  detail::split_cell(out.pixel.u / w * grid.sx, grid.sx, out.cell.i, out.cell.x);
  detail::split_cell(out.pixel.v / h * grid.sy, grid.sy, out.cell.j, out.cell.y);
  detail::split_cell((out.pixel.depth - cam.near_clip) / (cam.far_clip - cam.near_clip) * grid.sz,
                     grid.sz, out.cell.k, out.cell.z);
  return out;
}

/// Volume element containing `point`. Throws kOutOfImage / kOutOfFrustum.
inline CellCoords cell_of(const Vec3& point, const CameraIntrinsics& cam, const GridSpec& grid) {
  const CellLookup found = locate_cell(point, cam, grid);
  std::ostringstream msg;
  switch (found.status) {
    case CellStatus::kInside: return found.cell;
    case CellStatus::kBehindCamera:
      msg << "cell_of: point is behind the camera (z = " << point.z() << ")";
      throw Error(ErrorCode::kBehindCamera, msg.str());
    case CellStatus::kOutOfImage:
      msg << "cell_of: projection (u = " << found.pixel.u << ", v = " << found.pixel.v
          << ") is outside the " << cam.width << "x" << cam.height << " image";
      throw Error(ErrorCode::kOutOfImage, msg.str());
    case CellStatus::kOutOfFrustum:
      msg << "cell_of: depth z = " << found.pixel.depth << " is outside [" << cam.near_clip
          << ", " << cam.far_clip << "]";
      throw Error(ErrorCode::kOutOfFrustum, msg.str());
  }
  return found.cell;
}

/// Camera-frame point for a cell plus in-cell fractions (inverse of cell_of).
inline Vec3 cell_to_point(const CellCoords& c, const CameraIntrinsics& cam, const GridSpec& grid) {
  const double u = (c.i + c.x) * cam.width / grid.sx;
  const double v = (c.j + c.y) * cam.height / grid.sy;
  const double z = cam.near_clip + (c.k + c.z) * (cam.far_clip - cam.near_clip) / grid.sz;
  return backproject(u, v, z, cam);
}

// ---------------------------------------------------------------------------
// Diameter-enlarged image reference
// ---------------------------------------------------------------------------

/// Normalizes a point against the image grown by one object diameter on
/// every side (converted to pixels at the point's depth) and the depth range
/// grown by one diameter. Inside that frame all coordinates lie in [0, 1].
inline Vec3 enlarged_normalize(const Vec3& point, const CameraIntrinsics& cam, double diameter) {
  const PixelDepth px = project(point, cam);
  const double mu = cam.fu * diameter / px.depth;
  const double mv = cam.fv * diameter / px.depth;
  const double z0 = cam.near_clip - diameter;
  const double z1 = cam.far_clip + diameter;
  return {(px.u + mu) / (cam.width + 2.0 * mu), (px.v + mv) / (cam.height + 2.0 * mv),
          (px.depth - z0) / (z1 - z0)};
}

/// Inverse of enlarged_normalize.
inline Vec3 enlarged_denormalize(const Vec3& n, const CameraIntrinsics& cam, double diameter) {
  const double z0 = cam.near_clip - diameter;
  const double z1 = cam.far_clip + diameter;
  const double depth = z0 + n.z() * (z1 - z0);
  if (!(depth > 0.0)) {
    std::ostringstream msg;
    msg << "enlarged_denormalize: reconstructed depth " << depth << " is not positive";
    throw Error(ErrorCode::kBehindCamera, msg.str());
  }
  const double mu = cam.fu * diameter / depth;
  const double mv = cam.fv * diameter / depth;
  const double u = n.x() * (cam.width + 2.0 * mu) - mu;
  const double v = n.y() * (cam.height + 2.0 * mv) - mv;
  return backproject(u, v, depth, cam);
}

}  // namespace posegrid
