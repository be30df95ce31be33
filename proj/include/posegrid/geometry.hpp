#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "posegrid/error.hpp"

namespace posegrid {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Number of rotations used to approximate a revolution symmetry group.
inline constexpr std::size_t kDefaultRevolutionSamples = 360;

/// Reduces an angle into [0, period). Never returns `period` itself.
inline double wrap_angle(double angle, double period) {
  double r = std::fmod(angle, period);
  if (r < 0.0) r += period;
  if (!(r < period)) r = 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Rotation
// ---------------------------------------------------------------------------

/// Unit quaternion rotation. Always normalized; q and -q are the same rotation.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}

  explicit Rotation(const Eigen::Quaterniond& q) : q_(q) {
    const double n = q_.norm();
    require(std::isfinite(n) && n > 1e-300, ErrorCode::kInvalidArgument,
            "rotation: quaternion must be finite and non-zero");
    q_.coeffs() /= n;
  }

  static Rotation identity() { return Rotation(); }

  static Rotation from_wxyz(double w, double x, double y, double z) {
    return Rotation(Eigen::Quaterniond(w, x, y, z));
  }

  static Rotation about_axis(const Vec3& axis, double angle) {
    require(axis.allFinite() && axis.norm() > 0.0 && std::isfinite(angle),
            ErrorCode::kInvalidArgument, "rotation: axis must be finite and non-zero");
    return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
  }

  static Rotation about_z(double angle) {
    return from_wxyz(std::cos(0.5 * angle), 0.0, 0.0, std::sin(0.5 * angle));
  }

  static Rotation about_y(double angle) {
    return from_wxyz(std::cos(0.5 * angle), 0.0, std::sin(0.5 * angle), 0.0);
  }

  static Rotation from_matrix(const Mat3& m) { return Rotation(Eigen::Quaterniond(m)); }

  const Eigen::Quaterniond& quaternion() const { return q_; }

  /// Quaternion as (w, x, y, z) with the sign fixed so the first non-zero
  /// component is positive.
  std::array<double, 4> canonical_wxyz() const {
    std::array<double, 4> c{q_.w(), q_.x(), q_.y(), q_.z()};
    for (double v : c) {
      if (v > 0.0) break;
      if (v < 0.0) {
        for (double& u : c) u = -u;
        break;
      }
    }
    return c;
  }

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Vec3 apply(const Vec3& v) const { return q_ * v; }
  Rotation inverse() const { return Rotation(q_.conjugate()); }
  Rotation operator*(const Rotation& rhs) const { return Rotation(q_ * rhs.q_); }

  /// Geodesic angle in [0, pi] between the two rotations.
  double angle_to(const Rotation& other) const {
    const double d = std::min(1.0, std::abs(q_.dot(other.q_)));
    return 2.0 * std::acos(d);
  }

  bool is_approx(const Rotation& other, double tol = 1e-12) const {
    return 1.0 - std::abs(q_.dot(other.q_)) <= tol;
  }

  friend bool operator==(const Rotation& a, const Rotation& b) {
    return a.q_.coeffs() == b.q_.coeffs() || a.q_.coeffs() == -b.q_.coeffs();
  }

 private:
  Eigen::Quaterniond q_;
};

/// Uniformly distributed random rotation (Shoemake's method).
template <class Rng>
Rotation uniform_rotation(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u1 = unit(rng), u2 = unit(rng), u3 = unit(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  return Rotation::from_wxyz(b * std::cos(kTwoPi * u3), a * std::sin(kTwoPi * u2),
                             a * std::cos(kTwoPi * u2), b * std::sin(kTwoPi * u3));
}

// ---------------------------------------------------------------------------
// Pose
// ---------------------------------------------------------------------------

/// Rigid transform from object frame to camera frame. Translation in meters.
class Pose {
 public:
  Pose() : translation_(Vec3::Zero()) {}

  Pose(const Rotation& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {
    require(translation_.allFinite(), ErrorCode::kInvalidArgument,
            "pose: translation must be finite");
  }

  const Rotation& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 transform(const Vec3& p) const { return rotation_.apply(p) + translation_; }

  /// this * other: applies `other` first.
  Pose compose(const Pose& other) const {
    return Pose(rotation_ * other.rotation_, transform(other.translation_));
  }

  Pose inverse() const {
    const Rotation inv = rotation_.inverse();
    return Pose(inv, -inv.apply(translation_));
  }

  /// Right-multiplies the rotation, i.e. rotates in the object frame.
  Pose rotated_in_object_frame(const Rotation& g) const {
    return Pose(rotation_ * g, translation_);
  }

 private:
  Rotation rotation_;
  Vec3 translation_;
};

// ---------------------------------------------------------------------------
// Symmetry
// ---------------------------------------------------------------------------

enum class SymmetryKind { kNone, kCyclic, kRevolution };

/// Proper symmetry group about the object z-axis.
class SymmetrySpec {
 public:
  SymmetrySpec() = default;

  static SymmetrySpec none() { return SymmetrySpec(); }

  static SymmetrySpec cyclic(int order) {
    require(order >= 2, ErrorCode::kInvalidArgument, "symmetry: cyclic order must be >= 2");
    SymmetrySpec s;
    s.kind_ = SymmetryKind::kCyclic;
    s.order_ = order;
    return s;
  }

  /// `samples` is the number of evenly spaced z-rotations standing in for the
  /// continuous group when computing distances.
  static SymmetrySpec revolution(std::size_t samples = kDefaultRevolutionSamples) {
    require(samples >= 1, ErrorCode::kInvalidArgument,
            "symmetry: revolution samples must be >= 1");
    SymmetrySpec s;
    s.kind_ = SymmetryKind::kRevolution;
    s.samples_ = samples;
    return s;
  }

  SymmetryKind kind() const { return kind_; }

  /// k for cyclic groups, 1 without proper symmetry, 0 for revolution.
  int order() const { return order_; }

  std::size_t revolution_samples() const { return samples_; }

  /// Range of the last Euler angle: 2*pi/k (2*pi when asymmetric, 0 for revolution).
  double angle_period() const {
    return kind_ == SymmetryKind::kRevolution ? 0.0 : kTwoPi / order_;
  }

  friend bool operator==(const SymmetrySpec&, const SymmetrySpec&) = default;

 private:
  SymmetryKind kind_ = SymmetryKind::kNone;
  int order_ = 1;
  std::size_t samples_ = kDefaultRevolutionSamples;
};

inline std::string to_string(const SymmetrySpec& s) {
  switch (s.kind()) {
    case SymmetryKind::kNone: return "none";
    case SymmetryKind::kCyclic: return "cyclic:" + std::to_string(s.order());
    case SymmetryKind::kRevolution: return "revolution";
  }
  return "none";
}

/// Parses "none", "cyclic:<k>" or "revolution[:<samples>]".
inline SymmetrySpec parse_symmetry(const std::string& text) {
  if (text == "none") return SymmetrySpec::none();
  if (text == "revolution") return SymmetrySpec::revolution();
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const std::string head = text.substr(0, colon);
    long value = 0;
    try {
      std::size_t used = 0;
      value = std::stol(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1) value = -1;
    } catch (const std::exception&) {
      value = -1;
    }
    if (head == "cyclic" && value >= 2) return SymmetrySpec::cyclic(static_cast<int>(value));
    if (head == "revolution" && value >= 1)
      return SymmetrySpec::revolution(static_cast<std::size_t>(value));
  }
  throw Error(ErrorCode::kInvalidArgument, "symmetry: cannot parse '" + text + "'");
}

/// Rotations g with R*g indistinguishable from R.
inline std::vector<Rotation> symmetry_representatives(const SymmetrySpec& sym,
                                                      std::size_t n_revolution_samples) {
  require(n_revolution_samples >= 1, ErrorCode::kInvalidArgument,
          "symmetry_representatives: n_revolution_samples must be >= 1");
  std::size_t n = 1;
  if (sym.kind() == SymmetryKind::kCyclic) n = static_cast<std::size_t>(sym.order());
  if (sym.kind() == SymmetryKind::kRevolution) n = n_revolution_samples;
  std::vector<Rotation> reps;
  reps.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    reps.push_back(Rotation::about_z(kTwoPi * static_cast<double>(i) / static_cast<double>(n)));
  return reps;
}

inline std::vector<Rotation> symmetry_representatives(const SymmetrySpec& sym) {
  return symmetry_representatives(sym, sym.revolution_samples());
}

// ---------------------------------------------------------------------------
// Euler angles
// ---------------------------------------------------------------------------

/// Intrinsic Z-Y-Z angles: R = Rz(phi1) * Ry(phi2) * Rz(phi3).
struct EulerZYZ {
  double phi1 = 0.0;
  double phi2 = 0.0;
  double phi3 = 0.0;
  /// Set when sin(phi2) vanished and phi1/phi3 were not separable.
  bool gimbal_locked = false;
};

inline Rotation euler_to_rotation(const EulerZYZ& e) {
  require(std::isfinite(e.phi1) && std::isfinite(e.phi2) && std::isfinite(e.phi3),
          ErrorCode::kInvalidArgument, "euler_to_rotation: angles must be finite");
  return Rotation::about_z(e.phi1) * Rotation::about_y(e.phi2) * Rotation::about_z(e.phi3);
}

/// Below this |sin(phi2)| the first and last axes are treated as coincident.
inline constexpr double kGimbalLockSine = 1.5e-8;

/// Canonical Euler angles, with the last angle reduced by the symmetry group.
///
/// phi1 in [0, 2pi), phi2 in [0, pi], phi3 in [0, 2pi/k); phi3 = 0 for
/// revolution objects. At gimbal lock the combined z-rotation goes to phi3
/// (reduced modulo the group) for symmetric objects and to phi1 otherwise.
inline EulerZYZ rotation_to_euler(const Rotation& r, const SymmetrySpec& sym) {
  const Mat3 m = r.matrix();
  const double sin2 = std::hypot(m(0, 2), m(1, 2));
  EulerZYZ e;
  if (sin2 > kGimbalLockSine) {
    e.phi2 = std::atan2(sin2, m(2, 2));
    e.phi1 = wrap_angle(std::atan2(m(1, 2), m(0, 2)), kTwoPi);
    const double phi3 = std::atan2(m(2, 1), -m(2, 0));
    e.phi3 = sym.kind() == SymmetryKind::kRevolution ? 0.0 : wrap_angle(phi3, sym.angle_period());
    return e;
  }

  e.gimbal_locked = true;
  // phi2 = 0:  R = Rz(theta).            phi2 = pi: R = Rz(alpha) Ry(pi) = Ry(pi) Rz(-alpha).
  double about_first = 0.0;
  double about_last = 0.0;
  if (m(2, 2) > 0.0) {
    e.phi2 = 0.0;
    about_first = std::atan2(m(1, 0), m(0, 0));
    about_last = about_first;
  } else {
    e.phi2 = kPi;
    about_first = std::atan2(-m(1, 0), m(1, 1));
    about_last = -about_first;
  }
  switch (sym.kind()) {
    case SymmetryKind::kNone:
      e.phi1 = wrap_angle(about_first, kTwoPi);
      e.phi3 = 0.0;
      break;
    case SymmetryKind::kCyclic:
      e.phi1 = 0.0;
      e.phi3 = wrap_angle(about_last, sym.angle_period());
      break;
    case SymmetryKind::kRevolution:
      e.phi1 = 0.0;
      e.phi3 = 0.0;
      break;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Object model
// ---------------------------------------------------------------------------

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

/// Returns a reason when the additional points break the placement rules of
/// the symmetry class (on-axis for revolution, set-invariant for cyclic).
inline std::optional<std::string> check_additional_points(const SymmetrySpec& sym,
                                                          std::span<const Vec3> points,
                                                          double tolerance) {
  for (const Vec3& p : points)
    if (!p.allFinite()) return "additional point is not finite";
  if (sym.kind() == SymmetryKind::kRevolution) {
    for (const Vec3& p : points)
      if (std::abs(p.x()) > tolerance || std::abs(p.y()) > tolerance)
        return "revolution object: additional points must lie on the symmetry axis";
  } else if (sym.kind() == SymmetryKind::kCyclic) {
    const Rotation step = Rotation::about_z(kTwoPi / sym.order());
    for (const Vec3& p : points) {
      const Vec3 moved = step.apply(p);
      const bool found = std::any_of(points.begin(), points.end(), [&](const Vec3& q) {
        return (q - moved).norm() <= tolerance;
      });
      if (!found)
        return "cyclic object: additional points must map onto each other under the symmetry";
    }
  }
  return std::nullopt;
}

/// Rigid object description shared by rendering, encoding and evaluation.
class ObjectModel {
 public:
  /// Empty model; usable only as a placeholder.
  ObjectModel() = default;

  ObjectModel(SymmetrySpec symmetry, double diameter, std::vector<Vec3> surface_points,
              std::vector<Vec3> additional_points, std::vector<Sphere> shape_spheres,
              std::string name = {})
      : name_(std::move(name)),
        symmetry_(symmetry),
        diameter_(diameter),
        surface_points_(std::move(surface_points)),
        additional_points_(std::move(additional_points)),
        shape_spheres_(std::move(shape_spheres)) {
    require(std::isfinite(diameter_) && diameter_ > 0.0, ErrorCode::kInvalidArgument,
            "object model: diameter must be positive");
    require(surface_points_.size() >= 32, ErrorCode::kInvalidArgument,
            "object model: at least 32 surface points are required");
    const double radius_limit = 0.5 * diameter_ * (1.0 + 1e-12);
    for (const Vec3& p : surface_points_)
      require(p.allFinite() && p.norm() <= radius_limit, ErrorCode::kInvalidArgument,
              "object model: surface point outside the bounding sphere");
    for (const Sphere& s : shape_spheres_)
      require(s.center.allFinite() && std::isfinite(s.radius) && s.radius > 0.0,
              ErrorCode::kInvalidArgument, "object model: invalid shape sphere");
    if (auto reason = check_additional_points(symmetry_, additional_points_, 1e-9 * diameter_))
      throw Error(ErrorCode::kInvalidArgument, "object model: " + *reason);

    mean_.setZero();
    second_moment_.setZero();
    for (const Vec3& p : surface_points_) {
      mean_ += p;
      second_moment_ += p * p.transpose();
    }
    const double n = static_cast<double>(surface_points_.size());
    mean_ /= n;
    second_moment_ /= n;
  }

  const std::string& name() const { return name_; }
  const SymmetrySpec& symmetry() const { return symmetry_; }
  double diameter() const { return diameter_; }
  const std::vector<Vec3>& surface_points() const { return surface_points_; }
  const std::vector<Vec3>& additional_points() const { return additional_points_; }
  const std::vector<Sphere>& shape_spheres() const { return shape_spheres_; }

  /// Mean of the surface points.
  const Vec3& mean_point() const { return mean_; }
  /// Mean of s * s^T over the surface points.
  const Mat3& second_moment() const { return second_moment_; }

 private:
  std::string name_;
  SymmetrySpec symmetry_;
  double diameter_ = 0.0;
  std::vector<Vec3> surface_points_;
  std::vector<Vec3> additional_points_;
  std::vector<Sphere> shape_spheres_;
  Vec3 mean_ = Vec3::Zero();
  Mat3 second_moment_ = Mat3::Zero();
};

// ---------------------------------------------------------------------------
// Pose distance
// ---------------------------------------------------------------------------

struct SymmetryMatch {
  double distance = 0.0;
  std::size_t representative = 0;
  Rotation rotation;
};

namespace detail {

// Mean squared displacement for one symmetry element, expanded over the
// surface-point moments so that the cost does not depend on the point count.
inline double squared_distance_for(const Mat3& ra, const Mat3& rb, const Vec3& delta,
                                   const Mat3& g, const ObjectModel& model) {
  const Mat3 m = ra * g - rb;
  const double value = (m * model.second_moment() * m.transpose()).trace() +
                       2.0 * delta.dot(m * model.mean_point()) + delta.squaredNorm();
  return std::max(0.0, value);
}

inline Mat3 rz_matrix(double angle) {
  Mat3 g = Mat3::Identity();
  const double c = std::cos(angle), s = std::sin(angle);
  g(0, 0) = c;
  g(0, 1) = -s;
  g(1, 0) = s;
  g(1, 1) = c;
  return g;
}

}  // namespace detail

/// Best symmetry element g for comparing (Ra*g, ta) with (Rb, tb).
///
/// For revolution objects the squared distance is a sinusoid in the angle
/// about z, so only the samples around its analytic minimum are evaluated.
/// Ties go to the lowest representative index.
inline SymmetryMatch best_symmetry_match(const Pose& a, const Pose& b, const ObjectModel& model) {
  require(!model.surface_points().empty(), ErrorCode::kInvalidArgument,
          "pose_distance: object model has no surface points");
  const Mat3 ra = a.rotation().matrix();
  const Mat3 rb = b.rotation().matrix();
  const Vec3 delta = a.translation() - b.translation();
  const SymmetrySpec& sym = model.symmetry();

  std::size_t n = 1;
  if (sym.kind() == SymmetryKind::kCyclic) n = static_cast<std::size_t>(sym.order());
  if (sym.kind() == SymmetryKind::kRevolution) n = sym.revolution_samples();
  const double step = kTwoPi / static_cast<double>(n);

  std::vector<std::size_t> candidates;
  if (sym.kind() == SymmetryKind::kRevolution && n > 3) {
    const Mat3 q = ra.transpose() * rb;
    const Vec3 qt = ra.transpose() * delta;
    const Mat3 k = model.second_moment() * q.transpose() - model.mean_point() * qt.transpose();
    const double best_angle = wrap_angle(std::atan2(k(0, 1) - k(1, 0), k(0, 0) + k(1, 1)), kTwoPi);
    const auto nearest = static_cast<std::size_t>(std::llround(best_angle / step)) % n;
    candidates = {(nearest + n - 1) % n, nearest, (nearest + 1) % n};
    std::sort(candidates.begin(), candidates.end());
  } else {
    candidates.resize(n);
    for (std::size_t i = 0; i < n; ++i) candidates[i] = i;
  }

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  for (std::size_t i : candidates) {
    const double d2 = detail::squared_distance_for(
        ra, rb, delta, detail::rz_matrix(step * static_cast<double>(i)), model);
    if (d2 < best) {
      best = d2;
      best_index = i;
    }
  }
  return {std::sqrt(best), best_index, Rotation::about_z(step * static_cast<double>(best_index))};
}

/// Root-mean-square surface displacement between two poses, minimized over
/// the (sampled) symmetry group. Meters.
inline double pose_distance(const Pose& a, const Pose& b, const ObjectModel& model) {
  return best_symmetry_match(a, b, model).distance;
}

// ---------------------------------------------------------------------------
// Pose averaging
// ---------------------------------------------------------------------------

/// Weighted mean pose. Rotations are first moved onto the symmetry copy
/// closest to the reference (the first positively weighted pose), then
/// sign-aligned and averaged as quaternions.
inline Pose average_poses(std::span<const Pose> poses, std::span<const double> weights,
                          const ObjectModel& model) {
  require(!poses.empty(), ErrorCode::kInvalidArgument, "average_poses: no poses given");
  require(weights.size() == poses.size(), ErrorCode::kInvalidArgument,
          "average_poses: weights and poses differ in length");
  double total = 0.0;
  std::size_t ref = poses.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(std::isfinite(weights[i]) && weights[i] >= 0.0, ErrorCode::kInvalidArgument,
            "average_poses: weights must be finite and non-negative");
    total += weights[i];
    if (ref == poses.size() && weights[i] > 0.0) ref = i;
  }
  require(total > 0.0, ErrorCode::kInvalidArgument, "average_poses: weights sum to zero");
  if (poses.size() == 1) return poses[0];

  const Eigen::Quaterniond& q_ref = poses[ref].rotation().quaternion();
  Eigen::Vector4d q_sum = Eigen::Vector4d::Zero();
  Vec3 t_sum = Vec3::Zero();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const Rotation g = i == ref ? Rotation() : best_symmetry_match(poses[i], poses[ref], model).rotation;
    Eigen::Quaterniond q = (poses[i].rotation() * g).quaternion();
    if (q.dot(q_ref) < 0.0) q.coeffs() = -q.coeffs();
    q_sum += weights[i] * q.coeffs();
    t_sum += weights[i] * poses[i].translation();
  }
  Eigen::Quaterniond mean;
  mean.coeffs() = q_sum;
  return Pose(Rotation(mean), t_sum / total);
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

/// Declarative model: a union of spheres plus a symmetry class.
struct ModelDefinition {
  std::string name;
  SymmetrySpec symmetry;
  std::vector<Sphere> spheres;
  /// Defaults to two points at +-0.3 * diameter on the object z-axis.
  std::optional<std::vector<Vec3>> additional_points;
};

/// Builds an ObjectModel whose surface points sample the sphere union and
/// are closed under the symmetry group (so the pose distance is symmetric).
inline ObjectModel build_model(const ModelDefinition& def, std::size_t points_per_sphere = 48) {
  require(!def.spheres.empty(), ErrorCode::kInvalidArgument, "model '" + def.name + "': no spheres");
  double radius = 0.0;
  for (const Sphere& s : def.spheres) {
    require(s.center.allFinite() && std::isfinite(s.radius) && s.radius > 0.0,
            ErrorCode::kInvalidArgument, "model '" + def.name + "': invalid sphere");
    radius = std::max(radius, s.center.norm() + s.radius);
  }
  const double diameter = 2.0 * radius;

  // Fibonacci lattice on each sphere, keeping only points on the union boundary.
  std::vector<Vec3> base;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (std::size_t si = 0; si < def.spheres.size(); ++si) {
    const Sphere& s = def.spheres[si];
    for (std::size_t i = 0; i < points_per_sphere; ++i) {
      const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(points_per_sphere);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * static_cast<double>(i);
      const Vec3 p = s.center + s.radius * Vec3(r * std::cos(phi), r * std::sin(phi), z);
      bool inside = false;
      for (std::size_t sj = 0; sj < def.spheres.size() && !inside; ++sj)
        if (sj != si && (p - def.spheres[sj].center).norm() < def.spheres[sj].radius - 1e-12)
          inside = true;
      if (!inside) base.push_back(p);
    }
  }

  std::size_t copies = 1;
  if (def.symmetry.kind() == SymmetryKind::kCyclic) copies = static_cast<std::size_t>(def.symmetry.order());
  // Three or more evenly spaced copies already make the second moments
  // invariant to every rotation about z.
  if (def.symmetry.kind() == SymmetryKind::kRevolution) copies = 16;
  std::vector<Vec3> surface;
  surface.reserve(base.size() * copies);
  for (std::size_t c = 0; c < copies; ++c) {
    const Mat3 g = detail::rz_matrix(kTwoPi * static_cast<double>(c) / static_cast<double>(copies));
    for (const Vec3& p : base) surface.push_back(g * p);
  }

  std::vector<Vec3> extra = def.additional_points.value_or(
      std::vector<Vec3>{Vec3(0.0, 0.0, 0.3 * diameter), Vec3(0.0, 0.0, -0.3 * diameter)});
  return ObjectModel(def.symmetry, diameter, std::move(surface), std::move(extra), def.spheres, def.name);
}

/// Built-in test objects, one per symmetry class: "lump" (none),
/// "brick" (cyclic, k = 2) and "pepper" (revolution).
inline ModelDefinition preset_model(const std::string& name) {
  ModelDefinition def;
  def.name = name;
  if (name == "lump") {
    def.symmetry = SymmetrySpec::none();
    def.spheres = {{Vec3(0.0, 0.0, 0.0), 0.035},
                   {Vec3(0.03, 0.01, 0.01), 0.025},
                   {Vec3(-0.02, 0.025, -0.015), 0.02},
                   {Vec3(0.0, -0.03, 0.03), 0.018}};
  } else if (name == "brick") {
    def.symmetry = SymmetrySpec::cyclic(2);
    def.spheres = {{Vec3(0.0, 0.0, 0.0), 0.03},
                   {Vec3(0.035, 0.0, 0.0), 0.025},
                   {Vec3(-0.035, 0.0, 0.0), 0.025},
                   {Vec3(0.0, 0.0, 0.02), 0.022}};
  } else if (name == "pepper") {
    def.symmetry = SymmetrySpec::revolution();
    def.spheres = {{Vec3(0.0, 0.0, -0.03), 0.025},
                   {Vec3(0.0, 0.0, 0.0), 0.03},
                   {Vec3(0.0, 0.0, 0.035), 0.02}};
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown model preset '" + name + "'");
  }
  return def;
}

}  // namespace posegrid
