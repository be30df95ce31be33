#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "posegrid/angles.hpp"
#include "posegrid/camera.hpp"
#include "posegrid/codecs.hpp"
#include "posegrid/error.hpp"
#include "posegrid/parallel.hpp"

namespace posegrid {

enum class Lambda3Mode { kCubic, kLinear };

inline const char* to_string(Lambda3Mode m) { return m == Lambda3Mode::kCubic ? "cubic" : "linear"; }

inline Lambda3Mode parse_lambda3_mode(const std::string& s) {
  if (s == "cubic") return Lambda3Mode::kCubic;
  if (s == "linear") return Lambda3Mode::kLinear;
  throw Error(ErrorCode::kInvalidArgument, "unknown lambda3 mode '" + s + "'");
}

/// Weights of the multi-task loss. lambda3 depends on the GT visibility:
/// 8 v^3 (cubic) or v (linear), times `lambda3_scale`.
struct LossWeights {
  double lambda1 = 0.1;   ///< presence
  double lambda2 = 0.25;  ///< visibility
  double lambda3_scale = 1.0;
  Lambda3Mode lambda3_mode = Lambda3Mode::kCubic;
  double lambda4 = 1.0;   ///< orientation relative to position

  /// Linear pose weighting for the dense segmentation variant.
  static LossWeights for_variant(Variant v) {
    LossWeights w;
    if (v == Variant::kSegmentation) w.lambda3_mode = Lambda3Mode::kLinear;
    return w;
  }

  double lambda3(double visibility) const {
    const double base = lambda3_mode == Lambda3Mode::kCubic ? 8.0 * visibility * visibility * visibility : visibility;
    return lambda3_scale * base;
  }
};

struct LossOptions {
  /// Divide by the number of feature blocks instead of summing.
  bool normalize = false;
  /// Strict left-to-right summation; otherwise rows are reduced in parallel
  /// and combined in row order.
  bool deterministic_sum = true;
  std::size_t threads = 0;  ///< 0: POSEGRID_THREADS or 1
};

/// Weighted contributions; `total` is their sum.
struct LossBreakdown {
  double total = 0.0;
  double presence = 0.0;     ///< lambda1 * sum L_p
  double visibility = 0.0;   ///< lambda2 * sum L_v * p
  double position = 0.0;     ///< sum lambda3 * L_pos * p
  double orientation = 0.0;  ///< sum lambda3 * lambda4 * L_ori * p
};

namespace detail {

inline void check_loss_inputs(const OutputTensor& pred, const OutputTensor& gt, const GridSpec& grid) {
  require_matches(pred, grid, "loss (prediction)");
  require_matches(gt, grid, "loss (ground truth)");
  for (std::uint32_t i = 0; i < grid.sx; ++i)
    for (std::uint32_t j = 0; j < grid.sy; ++j)
      for (std::uint32_t b = 0; b < grid.blocks(); ++b) {
        const double p = gt.feature(i, j, b)[kPresence];
        if (p != 0.0 && p != 1.0) {
          std::ostringstream msg;
          msg << "loss: ground-truth presence at (" << i << ", " << j << ", block " << b << ") is " << p
              << ", expected 0 or 1";
          throw Error(ErrorCode::kInvalidArgument, msg.str());
        }
      }
}

inline void accumulate_block(std::span<const double> f_pred, std::span<const double> f_gt, const LossWeights& w,
                             int angle_channels, LossBreakdown& acc) {
  const double dp = f_pred[kPresence] - f_gt[kPresence];
  acc.presence += w.lambda1 * dp * dp;
  if (f_gt[kPresence] == 0.0) return;
  const double l3 = w.lambda3(f_gt[kVisibility]);
  const double dv = f_pred[kVisibility] - f_gt[kVisibility];
  acc.visibility += w.lambda2 * dv * dv;
  double pos = 0.0;
  for (std::uint32_t c = kPosX; c <= kPosZ; ++c) {
    const double d = f_pred[c] - f_gt[c];
    pos += d * d;
  }
  double ori = 0.0;
  for (int a = 0; a < angle_channels; ++a) {
    const double d = f_pred[kAngle1 + a] - f_gt[kAngle1 + a];
    ori += d * d;
  }
  acc.position += l3 * pos;
  acc.orientation += l3 * w.lambda4 * ori;
}

}  // namespace detail

/// Multi-task loss summed over every location and feature block. Pose and
/// visibility terms only count where the GT presence is 1. The angle
/// difference is taken without wrap-around.
inline LossBreakdown loss(const OutputTensor& pred, const OutputTensor& gt, const GridSpec& grid,
                          const LossWeights& weights, const SymmetrySpec& symmetry = {},
                          const LossOptions& options = {}) {
  detail::check_loss_inputs(pred, gt, grid);
  const int angles = angle_channel_count(symmetry);
  auto row = [&](std::uint32_t i, LossBreakdown& acc) {
    for (std::uint32_t j = 0; j < grid.sy; ++j)
      for (std::uint32_t b = 0; b < grid.blocks(); ++b)
        detail::accumulate_block(pred.feature(i, j, b), gt.feature(i, j, b), weights, angles, acc);
  };

  LossBreakdown out;
  if (options.deterministic_sum) {
    for (std::uint32_t i = 0; i < grid.sx; ++i) row(i, out);
  } else {
    std::vector<LossBreakdown> rows(grid.sx);
    parallel_for(grid.sx, [&](std::size_t i) { row(static_cast<std::uint32_t>(i), rows[i]); }, options.threads);
    for (const LossBreakdown& r : rows) {
      out.presence += r.presence;
      out.visibility += r.visibility;
      out.position += r.position;
      out.orientation += r.orientation;
    }
  }
  if (options.normalize) {
    const double n = static_cast<double>(grid.sx) * grid.sy * grid.blocks();
    out.presence /= n;
    out.visibility /= n;
    out.position /= n;
    out.orientation /= n;
  }
  out.total = out.presence + out.visibility + out.position + out.orientation;
  return out;
}

/// Analytic gradient of `loss(...).total` with respect to the prediction.
inline OutputTensor loss_grad(const OutputTensor& pred, const OutputTensor& gt, const GridSpec& grid,
                              const LossWeights& weights, const SymmetrySpec& symmetry = {},
                              const LossOptions& options = {}) {
  detail::check_loss_inputs(pred, gt, grid);
  const int angles = angle_channel_count(symmetry);
  const double scale = options.normalize ? 1.0 / (static_cast<double>(grid.sx) * grid.sy * grid.blocks()) : 1.0;
  OutputTensor grad = OutputTensor::zeros(grid);
  for (std::uint32_t i = 0; i < grid.sx; ++i)
    for (std::uint32_t j = 0; j < grid.sy; ++j)
      for (std::uint32_t b = 0; b < grid.blocks(); ++b) {
        const auto p = pred.feature(i, j, b);
        const auto g = gt.feature(i, j, b);
        auto d = grad.feature(i, j, b);
        d[kPresence] = scale * 2.0 * weights.lambda1 * (p[kPresence] - g[kPresence]);
        if (g[kPresence] == 0.0) continue;
        const double l3 = weights.lambda3(g[kVisibility]);
        d[kVisibility] = scale * 2.0 * weights.lambda2 * (p[kVisibility] - g[kVisibility]);
        for (std::uint32_t c = kPosX; c <= kPosZ; ++c) d[c] = scale * 2.0 * l3 * (p[c] - g[c]);
        for (int a = 0; a < angles; ++a)
          d[kAngle1 + a] = scale * 2.0 * l3 * weights.lambda4 * (p[kAngle1 + a] - g[kAngle1 + a]);
      }
  return grad;
}

}  // namespace posegrid
