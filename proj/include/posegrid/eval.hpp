#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "posegrid/error.hpp"
#include "posegrid/geometry.hpp"
#include "posegrid/postprocess.hpp"

namespace posegrid {

struct EvalConfig {
  double visibility_cutoff = 0.5;  ///< GT below this is ignored
  double radius_fraction = 0.1;    ///< correct if pose_distance <= fraction * diameter

  void validate() const {
    require(visibility_cutoff > 0.0 && visibility_cutoff <= 1.0, ErrorCode::kInvalidArgument,
            "eval: visibility cutoff must lie in (0, 1]");
    require(std::isfinite(radius_fraction) && radius_fraction > 0.0, ErrorCode::kInvalidArgument,
            "eval: radius fraction must be positive");
  }
};

struct GroundTruth {
  Pose pose;
  double visibility = 0.0;
};

enum class MatchLabel { kTruePositive, kFalsePositive, kIgnored };

struct MatchResult {
  std::vector<MatchLabel> labels;   ///< per prediction, input order
  std::vector<int> matched_gt;      ///< GT index claimed by each prediction, -1 otherwise
  std::vector<bool> gt_matched;     ///< per GT
  std::size_t eligible_gt = 0;
};

/// Greedy matching in descending confidence (ties by input index). Each
/// prediction claims the nearest unclaimed eligible GT within the radius
/// (ties by GT index). A prediction that claims nothing but lies within the
/// radius of an ignored (low-visibility) GT is neither TP nor FP.
inline MatchResult match(std::span<const FinalPrediction> preds, std::span<const GroundTruth> gts,
                         const ObjectModel& model, const EvalConfig& cfg) {
  cfg.validate();
  const double radius = cfg.radius_fraction * model.diameter();
  MatchResult out;
  out.labels.assign(preds.size(), MatchLabel::kFalsePositive);
  out.matched_gt.assign(preds.size(), -1);
  out.gt_matched.assign(gts.size(), false);
  std::vector<bool> eligible(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    eligible[g] = gts[g].visibility >= cfg.visibility_cutoff;
    if (eligible[g]) ++out.eligible_gt;
  }

  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].confidence > preds[b].confidence; });

  for (std::size_t p : order) {
    int best = -1;
    double best_distance = radius;
    bool near_ignored = false;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (eligible[g] && out.gt_matched[g]) continue;
      const double d = pose_distance(preds[p].pose, gts[g].pose, model);
      if (d > radius) continue;
      if (!eligible[g]) {
        near_ignored = true;
      } else if (best < 0 || d < best_distance) {
        best = static_cast<int>(g);
        best_distance = d;
      }
    }
    if (best >= 0) {
      out.labels[p] = MatchLabel::kTruePositive;
      out.matched_gt[p] = best;
      out.gt_matched[best] = true;
    } else if (near_ignored) {
      out.labels[p] = MatchLabel::kIgnored;
    }
  }
  return out;
}

struct ScoredLabel {
  double confidence = 0.0;
  bool true_positive = false;
};

struct PRPoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;  ///< one per distinct confidence, descending threshold
  double ap = 0.0;
};

/// TP/FP labels of the predictions that were not ignored.
inline std::vector<ScoredLabel> scored_labels(std::span<const FinalPrediction> preds, const MatchResult& m) {
  std::vector<ScoredLabel> out;
  for (std::size_t p = 0; p < preds.size(); ++p)
    if (m.labels[p] != MatchLabel::kIgnored)
      out.push_back({preds[p].confidence, m.labels[p] == MatchLabel::kTruePositive});
  return out;
}

/// Area under the precision envelope (precision at recall r replaced by
/// the best precision at any recall >= r). PR points are taken at every
/// distinct confidence, so tied confidences enter together.
/// With no GT the AP is 1 if there are no predictions and 0 otherwise.
inline PRCurve average_precision(std::span<const ScoredLabel> labels, std::size_t gt_count) {
  for (const ScoredLabel& l : labels)
    require(std::isfinite(l.confidence), ErrorCode::kInvalidArgument, "average_precision: non-finite confidence");
  PRCurve curve;
  if (gt_count == 0) {
    curve.ap = labels.empty() ? 1.0 : 0.0;
    return curve;
  }
  std::vector<ScoredLabel> sorted(labels.begin(), labels.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoredLabel& a, const ScoredLabel& b) { return a.confidence > b.confidence; });
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    (sorted[i].true_positive ? tp : fp) += 1;
    if (i + 1 < sorted.size() && sorted[i + 1].confidence == sorted[i].confidence) continue;
    curve.points.push_back({sorted[i].confidence, static_cast<double>(tp) / static_cast<double>(gt_count),
                            static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  double envelope = 0.0;
  std::vector<double> best(curve.points.size());
  for (std::size_t i = curve.points.size(); i-- > 0;) {
    envelope = std::max(envelope, curve.points[i].precision);
    best[i] = envelope;
  }
  double previous_recall = 0.0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    curve.ap += (curve.points[i].recall - previous_recall) * best[i];
    previous_recall = curve.points[i].recall;
  }
  curve.ap = std::clamp(curve.ap, 0.0, 1.0);
  return curve;
}

// ---------------------------------------------------------------------------
// Dataset evaluation
// ---------------------------------------------------------------------------

struct SceneEvaluationInput {
  std::string scene_id;
  const ObjectModel* model = nullptr;
  std::vector<FinalPrediction> predictions;
  std::vector<GroundTruth> ground_truth;
};

struct SceneReport {
  std::string scene_id;
  std::string model_name;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t ignored = 0;
  std::size_t eligible_gt = 0;
  double ap = 0.0;
};

struct ModelReport {
  std::string model_name;
  std::size_t scenes = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t eligible_gt = 0;
  PRCurve curve;
};

struct DatasetReport {
  std::vector<SceneReport> scenes;
  std::vector<ModelReport> models;  ///< sorted by model name
  PRCurve pooled;                   ///< all scenes, all models
  double macro_ap = 0.0;            ///< mean of per-scene AP
};

/// Per-scene AP plus AP over the pooled (confidence, label) pairs, overall
/// and per object model.
inline DatasetReport evaluate_dataset(std::span<const SceneEvaluationInput> scenes, const EvalConfig& cfg) {
  cfg.validate();
  DatasetReport report;
  std::set<std::string> ids;
  std::vector<ScoredLabel> pooled;
  std::size_t pooled_gt = 0;
  struct Pool {
    std::vector<ScoredLabel> labels;
    ModelReport report;
  };
  std::map<std::string, Pool> per_model;

  for (const SceneEvaluationInput& s : scenes) {
    require(s.model != nullptr, ErrorCode::kInvalidArgument, "evaluate: scene '" + s.scene_id + "' has no model");
    require(ids.insert(s.scene_id).second, ErrorCode::kSceneMismatch,
            "evaluate: scene id '" + s.scene_id + "' appears more than once");
    const MatchResult m = match(s.predictions, s.ground_truth, *s.model, cfg);
    const std::vector<ScoredLabel> labels = scored_labels(s.predictions, m);

    SceneReport sr;
    sr.scene_id = s.scene_id;
    sr.model_name = s.model->name();
    sr.eligible_gt = m.eligible_gt;
    for (MatchLabel l : m.labels) {
      if (l == MatchLabel::kTruePositive) ++sr.true_positives;
      if (l == MatchLabel::kFalsePositive) ++sr.false_positives;
      if (l == MatchLabel::kIgnored) ++sr.ignored;
    }
    sr.ap = average_precision(labels, m.eligible_gt).ap;

    Pool& pool = per_model[sr.model_name];
    pool.report.model_name = sr.model_name;
    ++pool.report.scenes;
    pool.report.true_positives += sr.true_positives;
    pool.report.false_positives += sr.false_positives;
    pool.report.eligible_gt += sr.eligible_gt;
    pool.labels.insert(pool.labels.end(), labels.begin(), labels.end());
    pooled.insert(pooled.end(), labels.begin(), labels.end());
    pooled_gt += m.eligible_gt;
    report.macro_ap += sr.ap;
    report.scenes.push_back(std::move(sr));
  }
  if (!report.scenes.empty()) report.macro_ap /= static_cast<double>(report.scenes.size());
  report.pooled = average_precision(pooled, pooled_gt);
  for (auto& [name, pool] : per_model) {
    pool.report.curve = average_precision(pool.labels, pool.report.eligible_gt);
    report.models.push_back(std::move(pool.report));
  }
  return report;
}

}  // namespace posegrid
