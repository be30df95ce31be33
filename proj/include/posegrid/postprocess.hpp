#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <tuple>
#include <vector>

#include "posegrid/codecs.hpp"
#include "posegrid/error.hpp"
#include "posegrid/geometry.hpp"
#include "posegrid/parallel.hpp"

namespace posegrid {

/// Density-based clustering parameters. eps is a pose_distance in meters.
struct ClusterParams {
  double eps = 0.0;
  std::size_t min_points = 1;
  double confidence_threshold = 0.0;

  static ClusterParams for_model(const ObjectModel& model, double eps_fraction = 0.1) {
    return {eps_fraction * model.diameter(), 1, 0.0};
  }

  void validate() const {
    require(std::isfinite(eps) && eps > 0.0, ErrorCode::kInvalidArgument, "cluster: eps must be positive");
    require(min_points >= 1, ErrorCode::kInvalidArgument, "cluster: min_points must be >= 1");
    require(confidence_threshold >= 0.0 && confidence_threshold <= 1.0, ErrorCode::kInvalidArgument,
            "cluster: confidence threshold must lie in [0, 1]");
  }
};

struct FinalPrediction {
  Pose pose;
  double confidence = 0.0;   ///< highest member confidence
  std::size_t support = 0;   ///< number of merged hypotheses
  std::vector<std::size_t> members;  ///< indices into the clustered input
};

namespace detail {

// Total order used to make clustering independent of input order.
inline bool canonical_less(const PoseHypothesis& a, const PoseHypothesis& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  const Vec3& ta = a.pose.translation();
  const Vec3& tb = b.pose.translation();
  for (int c = 0; c < 3; ++c)
    if (ta[c] != tb[c]) return ta[c] < tb[c];
  const auto qa = a.pose.rotation().canonical_wxyz();
  const auto qb = b.pose.rotation().canonical_wxyz();
  if (qa != qb) return qa < qb;
  if (a.visibility != b.visibility) return a.visibility < b.visibility;
  return a.cell < b.cell;
}

}  // namespace detail

/// DBSCAN over pose_distance, followed by confidence-weighted averaging of
/// each cluster.
///
/// Hypotheses below the confidence threshold are dropped first. A point is
/// core when at least `min_points` hypotheses (itself included) lie within
/// eps. Clusters are the connected components of core points; a border point
/// joins the cluster of its highest-confidence core neighbor; remaining
/// points are noise and discarded.
inline std::vector<FinalPrediction> cluster(std::span<const PoseHypothesis> hyps, const ClusterParams& params,
                                            const ObjectModel& model, std::size_t threads = 0) {
  params.validate();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < hyps.size(); ++i)
    if (hyps[i].confidence >= params.confidence_threshold) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detail::canonical_less(hyps[a], hyps[b]); });
  const std::size_t n = order.size();
  if (n == 0) return {};

  // Translations further apart than this bound cannot be within eps.
  const double reject = params.eps + 2.0 * model.mean_point().norm();
  std::vector<std::vector<std::size_t>> neighbors(n);
  parallel_for(
      n,
      [&](std::size_t a) {
        const Pose& pa = hyps[order[a]].pose;
        for (std::size_t b = 0; b < n; ++b) {
          if (b == a) {
            neighbors[a].push_back(b);
            continue;
          }
          const Pose& pb = hyps[order[b]].pose;
          if ((pa.translation() - pb.translation()).norm() > reject) continue;
          // Evaluate each pair in a fixed orientation so the relation is symmetric.
          const double d = a < b ? pose_distance(pa, pb, model) : pose_distance(pb, pa, model);
          if (d <= params.eps) neighbors[a].push_back(b);
        }
      },
      threads);

  std::vector<bool> core(n);
  for (std::size_t a = 0; a < n; ++a) core[a] = neighbors[a].size() >= params.min_points;

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> label(n, kNone);
  std::size_t clusters = 0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || label[seed] != kNone) continue;
    std::vector<std::size_t> stack{seed};
    label[seed] = clusters;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b : neighbors[a]) {
        if (!core[b] || label[b] != kNone) continue;
        label[b] = clusters;
        stack.push_back(b);
      }
    }
    ++clusters;
  }
  // Neighbor lists are in canonical order, i.e. by descending confidence.
  for (std::size_t a = 0; a < n; ++a) {
    if (core[a]) continue;
    for (std::size_t b : neighbors[a]) {
      if (core[b]) {
        label[a] = label[b];
        break;
      }
    }
  }

  std::vector<std::vector<std::size_t>> groups(clusters);
  for (std::size_t a = 0; a < n; ++a)
    if (label[a] != kNone) groups[label[a]].push_back(a);

  std::vector<FinalPrediction> out;
  out.reserve(clusters);
  for (const auto& group : groups) {
    if (group.empty()) continue;
    std::vector<Pose> poses;
    std::vector<double> weights;
    FinalPrediction pred;
    double weight_sum = 0.0;
    for (std::size_t a : group) {
      const PoseHypothesis& h = hyps[order[a]];
      poses.push_back(h.pose);
      weights.push_back(h.confidence);
      weight_sum += h.confidence;
      pred.confidence = std::max(pred.confidence, h.confidence);
      pred.members.push_back(order[a]);
    }
    if (weight_sum <= 0.0) std::fill(weights.begin(), weights.end(), 1.0);
    pred.pose = average_poses(poses, weights, model);
    pred.support = group.size();
    out.push_back(std::move(pred));
  }
  return out;
}

}  // namespace posegrid
