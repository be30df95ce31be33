#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "posegrid/angles.hpp"
#include "posegrid/camera.hpp"
#include "posegrid/error.hpp"
#include "posegrid/geometry.hpp"
#include "posegrid/scenegen.hpp"

namespace posegrid {

// ---------------------------------------------------------------------------
// Output tensor
// ---------------------------------------------------------------------------

/// Sx x Sy x C grid of reals, stored row-major over (i, j, channel).
class OutputTensor {
 public:
  OutputTensor() = default;
  OutputTensor(std::uint32_t sx, std::uint32_t sy, std::uint32_t channels)
      : sx_(sx), sy_(sy), channels_(channels),
        data_(static_cast<std::size_t>(sx) * sy * channels, 0.0) {}

  static OutputTensor zeros(const GridSpec& grid) { return OutputTensor(grid.sx, grid.sy, grid.channels()); }

  std::uint32_t sx() const { return sx_; }
  std::uint32_t sy() const { return sy_; }
  std::uint32_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::uint32_t i, std::uint32_t j, std::uint32_t c) const {
    return (static_cast<std::size_t>(i) * sy_ + j) * channels_ + c;
  }
  double& at(std::uint32_t i, std::uint32_t j, std::uint32_t c) { return data_[index(i, j, c)]; }
  double at(std::uint32_t i, std::uint32_t j, std::uint32_t c) const { return data_[index(i, j, c)]; }

  /// The 8 entries of feature block `block` at location (i, j).
  std::span<double> feature(std::uint32_t i, std::uint32_t j, std::uint32_t block) {
    return std::span<double>(data_).subspan(index(i, j, block * kFeatureSize), kFeatureSize);
  }
  std::span<const double> feature(std::uint32_t i, std::uint32_t j, std::uint32_t block) const {
    return std::span<const double>(data_).subspan(index(i, j, block * kFeatureSize), kFeatureSize);
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool matches(const GridSpec& grid) const {
    return sx_ == grid.sx && sy_ == grid.sy && channels_ == grid.channels();
  }

  friend bool operator==(const OutputTensor&, const OutputTensor&) = default;

 private:
  std::uint32_t sx_ = 0;
  std::uint32_t sy_ = 0;
  std::uint32_t channels_ = 0;
  std::vector<double> data_;
};

inline void require_matches(const OutputTensor& t, const GridSpec& grid, const char* what) {
  if (t.matches(grid)) return;
  std::ostringstream msg;
  msg << what << ": tensor is " << t.sx() << "x" << t.sy() << "x" << t.channels() << " but grid "
      << to_string(grid.variant) << " expects " << grid.sx << "x" << grid.sy << "x" << grid.channels();
  throw Error(ErrorCode::kDimensionMismatch, msg.str());
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

enum class SkipReason { kOriginOutOfImage, kOriginOutOfFrustum, kOriginBehindCamera };

inline const char* to_string(SkipReason r) {
  switch (r) {
    case SkipReason::kOriginOutOfImage: return "origin outside image";
    case SkipReason::kOriginOutOfFrustum: return "origin outside depth range";
    case SkipReason::kOriginBehindCamera: return "origin behind camera";
  }
  return "";
}

struct EncodeSkip {
  int id = 0;
  SkipReason reason = SkipReason::kOriginOutOfImage;
};

struct EncodeResult {
  OutputTensor tensor;
  std::vector<int> captured_ids;     ///< ids present in at least one cell, ascending
  std::vector<EncodeSkip> skipped;   ///< origins that could not be placed in a cell
};

namespace detail {

struct Claim {
  int priority = 0;  // 0 = origin, 1 = additional point / extension
  double visibility = 0.0;
  int id = 0;
  std::size_t annotation = 0;
};

// Origins first, then higher visibility, then lower instance id.
inline bool outranks(const Claim& a, const Claim& b) {
  if (a.priority != b.priority) return a.priority < b.priority;
  if (a.visibility != b.visibility) return a.visibility > b.visibility;
  return a.id < b.id;
}

inline void offer(std::optional<Claim>& slot, const Claim& c) {
  if (!slot || outranks(c, *slot)) slot = c;
}

struct EncodedObject {
  const Annotation* annotation = nullptr;
  NormalizedAngles angles{};
  CellLookup origin;
  Vec3 enlarged = Vec3::Zero();
};

class Encoder {
 public:
  Encoder(std::span<const Annotation> annotations, const RenderResult& rendered, const ObjectModel& model,
          const CameraIntrinsics& cam, const GridSpec& grid)
      : annotations_(annotations), rendered_(rendered), model_(model), cam_(cam), grid_(grid) {
    grid_.validate();
    cam_.validate();
    result_.tensor = OutputTensor::zeros(grid_);
    std::vector<bool> seen(rendered_.visibility.size(), false);
    objects_.reserve(annotations_.size());
    for (const Annotation& a : annotations_) {
      if (a.id < 0 || static_cast<std::size_t>(a.id) >= rendered_.visibility.size() || seen[a.id]) {
        std::ostringstream msg;
        msg << "encode: annotation id " << a.id << " is missing from the render result or repeated";
        throw Error(ErrorCode::kSceneMismatch, msg.str());
      }
      seen[a.id] = true;
      EncodedObject o;
      o.annotation = &a;
      o.angles = angle_normalize(rotation_to_euler(a.pose.rotation(), model_.symmetry()), model_.symmetry());
      if (a.pose.translation().z() > 0.0 && uses_enlarged_reference(grid_.variant))
        o.enlarged = enlarged_normalize(a.pose.translation(), cam_, model_.diameter());
      if (grid_.variant != Variant::kSegmentation) {
        o.origin = locate_cell(a.pose.translation(), cam_, grid_);
        if (o.origin.status != CellStatus::kInside) {
          SkipReason reason = SkipReason::kOriginOutOfImage;
          if (o.origin.status == CellStatus::kOutOfFrustum) reason = SkipReason::kOriginOutOfFrustum;
          if (o.origin.status == CellStatus::kBehindCamera) reason = SkipReason::kOriginBehindCamera;
          result_.skipped.push_back({a.id, reason});
        }
      }
      objects_.push_back(o);
    }
  }

  EncodeResult run() {
    switch (grid_.variant) {
      case Variant::kVanilla:
      case Variant::kZ: encode_by_origin(); break;
      case Variant::kEve: encode_extended(); break;
      case Variant::kAdditionalPoints: encode_additional_points(); break;
      case Variant::kMultiPose: encode_multi_pose(); break;
      case Variant::kSegmentation: encode_segmentation(); break;
    }
    std::sort(captured_.begin(), captured_.end());
    captured_.erase(std::unique(captured_.begin(), captured_.end()), captured_.end());
    result_.captured_ids = std::move(captured_);
    return std::move(result_);
  }

 private:
  std::size_t slot(int i, int j, int k = 0) const {
    return (static_cast<std::size_t>(i) * grid_.sy + j) * grid_.sz + k;
  }

  Claim claim_for(std::size_t index, int priority) const {
    const Annotation& a = *objects_[index].annotation;
    return {priority, a.visibility, a.id, index};
  }

  void write(int i, int j, std::uint32_t block, std::size_t index, const Vec3& position) {
    const EncodedObject& o = objects_[index];
    auto f = result_.tensor.feature(i, j, block);
    f[kPresence] = 1.0;
    f[kVisibility] = o.annotation->visibility;
    f[kPosX] = position.x();
    f[kPosY] = position.y();
    f[kPosZ] = position.z();
    f[kAngle1] = o.angles[0];
    f[kAngle2] = o.angles[1];
    f[kAngle3] = o.angles[2];
    captured_.push_back(o.annotation->id);
  }

  Vec3 in_cell(const CellCoords& c) const { return {c.x, c.y, c.z}; }

  std::vector<std::optional<Claim>> origin_claims() const {
    std::vector<std::optional<Claim>> cells(static_cast<std::size_t>(grid_.sx) * grid_.sy * grid_.sz);
    for (std::size_t n = 0; n < objects_.size(); ++n) {
      const CellLookup& o = objects_[n].origin;
      if (o.status == CellStatus::kInside) offer(cells[slot(o.cell.i, o.cell.j, o.cell.k)], claim_for(n, 0));
    }
    return cells;
  }

  // Vanilla and Z: one feature vector per (i, j, k), highest visibility wins.
  void encode_by_origin() {
    const auto cells = origin_claims();
    for (const auto& c : cells) {
      if (!c) continue;
      const CellCoords& cell = objects_[c->annotation].origin.cell;
      write(cell.i, cell.j, static_cast<std::uint32_t>(cell.k), c->annotation, in_cell(cell));
    }
  }

  // EVE: origins as in vanilla, then copies into neighbors of cells whose
  // origin lies within 0.2 of a border. Copies never replace an origin.
  void encode_extended() {
    constexpr double kBorder = 0.2;
    const auto origins = origin_claims();
    std::vector<std::optional<Claim>> extensions(origins.size());
    for (std::size_t n = 0; n < objects_.size(); ++n) {
      const CellLookup& o = objects_[n].origin;
      if (o.status != CellStatus::kInside) continue;
      const int dx = o.cell.x < kBorder ? -1 : (1.0 - o.cell.x < kBorder ? 1 : 0);
      const int dy = o.cell.y < kBorder ? -1 : (1.0 - o.cell.y < kBorder ? 1 : 0);
      const int offsets[3][2] = {{dx, 0}, {0, dy}, {dx, dy}};
      for (const auto& off : offsets) {
        if (off[0] == 0 && off[1] == 0) continue;
        const int i = o.cell.i + off[0], j = o.cell.j + off[1];
        if (i < 0 || j < 0 || i >= static_cast<int>(grid_.sx) || j >= static_cast<int>(grid_.sy)) continue;
        if (origins[slot(i, j)]) continue;
        offer(extensions[slot(i, j)], claim_for(n, 1));
      }
    }
    for (std::uint32_t i = 0; i < grid_.sx; ++i)
      for (std::uint32_t j = 0; j < grid_.sy; ++j) {
        const auto& c = origins[slot(i, j)] ? origins[slot(i, j)] : extensions[slot(i, j)];
        if (c) write(i, j, 0, c->annotation, objects_[c->annotation].enlarged);
      }
  }

  // AP: origins and transformed additional points claim cells; origins
  // take precedence, then visibility. Every claimed cell holds the full pose.
  void encode_additional_points() {
    auto cells = origin_claims();
    for (std::size_t n = 0; n < objects_.size(); ++n) {
      const Pose& pose = objects_[n].annotation->pose;
      for (const Vec3& p : model_.additional_points()) {
        const CellLookup found = locate_cell(pose.transform(p), cam_, grid_);
        if (found.status != CellStatus::kInside) continue;
        offer(cells[slot(found.cell.i, found.cell.j)], claim_for(n, 1));
      }
    }
    for (std::uint32_t i = 0; i < grid_.sx; ++i)
      for (std::uint32_t j = 0; j < grid_.sy; ++j)
        if (const auto& c = cells[slot(i, j)]) write(i, j, 0, c->annotation, objects_[c->annotation].enlarged);
  }

  // MP: up to P origins per location, ranked by visibility into blocks 0..P-1.
  void encode_multi_pose() {
    std::vector<std::vector<Claim>> cells(static_cast<std::size_t>(grid_.sx) * grid_.sy);
    for (std::size_t n = 0; n < objects_.size(); ++n) {
      const CellLookup& o = objects_[n].origin;
      if (o.status == CellStatus::kInside) cells[slot(o.cell.i, o.cell.j)].push_back(claim_for(n, 0));
    }
    for (std::uint32_t i = 0; i < grid_.sx; ++i)
      for (std::uint32_t j = 0; j < grid_.sy; ++j) {
        auto& list = cells[slot(i, j)];
        std::sort(list.begin(), list.end(), outranks);
        const std::size_t keep = std::min<std::size_t>(list.size(), grid_.poses);
        for (std::size_t l = 0; l < keep; ++l)
          write(i, j, static_cast<std::uint32_t>(l), list[l].annotation,
                in_cell(objects_[list[l].annotation].origin.cell));
      }
  }

  // SI: nearest-neighbor downsampled instance segmentation.
  void encode_segmentation() {
    const LabelImage& seg = rendered_.segmentation;
    require(seg.width() == cam_.width && seg.height() == cam_.height, ErrorCode::kDimensionMismatch,
            "encode: segmentation size does not match the camera image size");
    std::vector<std::size_t> by_id(rendered_.visibility.size(), objects_.size());
    for (std::size_t n = 0; n < objects_.size(); ++n) by_id[objects_[n].annotation->id] = n;
    for (std::uint32_t i = 0; i < grid_.sx; ++i)
      for (std::uint32_t j = 0; j < grid_.sy; ++j) {
        const auto [u, v] = segmentation_sample(i, j, cam_, grid_);
        const std::int32_t id = seg.at(u, v);
        if (id == kBackground) continue;
        if (id < 0 || static_cast<std::size_t>(id) >= by_id.size() || by_id[id] == objects_.size()) {
          std::ostringstream msg;
          msg << "encode: segmentation id " << id << " has no annotation";
          throw Error(ErrorCode::kSceneMismatch, msg.str());
        }
        write(i, j, 0, by_id[id], objects_[by_id[id]].enlarged);
      }
  }

 public:
  /// Full-resolution pixel sampled for low-resolution location (i, j).
  static std::pair<int, int> segmentation_sample(std::uint32_t i, std::uint32_t j, const CameraIntrinsics& cam,
                                                 const GridSpec& grid) {
    const int u = std::min(cam.width - 1, static_cast<int>((i + 0.5) * cam.width / grid.sx));
    const int v = std::min(cam.height - 1, static_cast<int>((j + 0.5) * cam.height / grid.sy));
    return {u, v};
  }

 private:
  std::span<const Annotation> annotations_;
  const RenderResult& rendered_;
  const ObjectModel& model_;
  const CameraIntrinsics& cam_;
  GridSpec grid_;
  std::vector<EncodedObject> objects_;
  std::vector<int> captured_;
  EncodeResult result_;
};

}  // namespace detail

/// Ground-truth tensor plus which objects it represents.
inline EncodeResult encode_detailed(std::span<const Annotation> annotations, const RenderResult& rendered,
                                    const ObjectModel& model, const CameraIntrinsics& cam, const GridSpec& grid) {
  return detail::Encoder(annotations, rendered, model, cam, grid).run();
}

inline OutputTensor encode(std::span<const Annotation> annotations, const RenderResult& rendered,
                           const ObjectModel& model, const CameraIntrinsics& cam, const GridSpec& grid) {
  return encode_detailed(annotations, rendered, model, cam, grid).tensor;
}

/// Nearest-neighbor downsampling of a label image onto the grid.
inline LabelImage downsample_segmentation(const LabelImage& seg, const CameraIntrinsics& cam, const GridSpec& grid) {
  LabelImage out(static_cast<int>(grid.sx), static_cast<int>(grid.sy), kBackground);
  for (std::uint32_t i = 0; i < grid.sx; ++i)
    for (std::uint32_t j = 0; j < grid.sy; ++j) {
      const auto [u, v] = detail::Encoder::segmentation_sample(i, j, cam, grid);
      out.at(static_cast<int>(i), static_cast<int>(j)) = seg.at(u, v);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

struct SourceCell {
  std::uint32_t i = 0, j = 0, k = 0, l = 0;
  friend auto operator<=>(const SourceCell&, const SourceCell&) = default;
};

struct PoseHypothesis {
  double confidence = 0.0;
  double visibility = 0.0;
  Pose pose;
  SourceCell cell;
};

/// Turns every feature block with presence >= threshold into a pose.
/// For MP the blocks of a location are read in order until the first one
/// below threshold. Blocks whose values cannot form a pose are dropped.
inline std::vector<PoseHypothesis> decode(const OutputTensor& tensor, const GridSpec& grid,
                                          const CameraIntrinsics& cam, const ObjectModel& model,
                                          double threshold) {
  grid.validate();
  cam.validate();
  require_matches(tensor, grid, "decode");
  require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::kInvalidArgument,
          "decode: threshold must lie in [0, 1]");
  const bool enlarged = uses_enlarged_reference(grid.variant);
  std::vector<PoseHypothesis> out;
  for (std::uint32_t i = 0; i < grid.sx; ++i) {
    for (std::uint32_t j = 0; j < grid.sy; ++j) {
      for (std::uint32_t b = 0; b < grid.blocks(); ++b) {
        const auto f = tensor.feature(i, j, b);
        if (!(f[kPresence] >= threshold)) {
          if (grid.variant == Variant::kMultiPose) break;
          continue;
        }
        if (!std::all_of(f.begin(), f.end(), [](double x) { return std::isfinite(x); })) continue;
        const SourceCell src{i, j, grid.variant == Variant::kZ ? b : 0u,
                             grid.variant == Variant::kMultiPose ? b : 0u};
        Vec3 t;
        try {
          if (enlarged) {
            t = enlarged_denormalize(Vec3(f[kPosX], f[kPosY], f[kPosZ]), cam, model.diameter());
          } else {
            t = cell_to_point({static_cast<int>(i), static_cast<int>(j), static_cast<int>(src.k), f[kPosX],
                               f[kPosY], f[kPosZ]},
                              cam, grid);
          }
        } catch (const Error&) {
          continue;
        }
        const EulerZYZ e = angle_denormalize({f[kAngle1], f[kAngle2], f[kAngle3]}, model.symmetry());
        out.push_back({std::clamp(f[kPresence], 0.0, 1.0), std::clamp(f[kVisibility], 0.0, 1.0),
                       Pose(euler_to_rotation(e), t), src});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

struct VariantCoverage {
  GridSpec grid;
  std::size_t eligible = 0;  ///< objects with visibility >= cutoff
  std::size_t captured = 0;  ///< eligible objects present in the GT tensor
  std::size_t missed = 0;
  std::vector<int> missed_ids;
};

/// Which visible objects each parameterization can represent at all.
inline std::vector<VariantCoverage> coverage_report(std::span<const Annotation> annotations,
                                                    const RenderResult& rendered, const ObjectModel& model,
                                                    const CameraIntrinsics& cam, std::span<const GridSpec> grids,
                                                    double visibility_cutoff = 0.5) {
  std::vector<VariantCoverage> out;
  out.reserve(grids.size());
  for (const GridSpec& grid : grids) {
    const EncodeResult enc = encode_detailed(annotations, rendered, model, cam, grid);
    VariantCoverage c;
    c.grid = grid;
    for (const Annotation& a : annotations) {
      if (a.visibility < visibility_cutoff) continue;
      ++c.eligible;
      if (std::binary_search(enc.captured_ids.begin(), enc.captured_ids.end(), a.id)) {
        ++c.captured;
      } else {
        ++c.missed;
        c.missed_ids.push_back(a.id);
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace posegrid
