#include <gtest/gtest.h>

#include <memory>
#include <random>

#include "posegrid/cli.hpp"
#include "posegrid/codecs.hpp"
#include "support.hpp"

using namespace posegrid;

namespace {

const CameraIntrinsics kCam;

RenderResult blank_render(std::vector<double> visibility) {
  RenderResult r;
  r.depth = DepthImage(kCam.width, kCam.height, 0.0);
  r.segmentation = LabelImage(kCam.width, kCam.height, kBackground);
  r.visibility = visibility;
  r.visibility_unclipped = visibility;
  return r;
}

Annotation at_pixel(int id, double u, double v, double depth, double visibility,
                    const Rotation& r = Rotation::about_y(0.8) * Rotation::about_z(0.3)) {
  return {id, Pose(r, backproject(u, v, depth, kCam)), visibility};
}

std::vector<double> visibilities(const std::vector<Annotation>& a) {
  std::vector<double> v;
  for (const Annotation& x : a) v.push_back(x.visibility);
  return v;
}

EncodeResult run(const std::vector<Annotation>& a, Variant variant, const ObjectModel& m, RenderResult r) {
  return encode_detailed(a, r, m, kCam, GridSpec::defaults(variant));
}

EncodeResult run(const std::vector<Annotation>& a, Variant variant, const ObjectModel& m) {
  return run(a, variant, m, blank_render(visibilities(a)));
}

}  // namespace

TEST(Angles, NormalizeRangesAndErrors) {
  const NormalizedAngles a = angle_normalize({kPi, kPi / 2, kPi / 2}, SymmetrySpec::cyclic(2));
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.25);
  EXPECT_DOUBLE_EQ(a[2], 0.5);
  EXPECT_EQ(angle_normalize({1.0, 1.0, 0.0}, SymmetrySpec::revolution())[2], 0.0);
  EXPECT_THROW(angle_normalize({-0.1, 0, 0}, SymmetrySpec::none()), Error);
  EXPECT_THROW(angle_normalize({0, 0, kPi}, SymmetrySpec::cyclic(2)), Error);
  const EulerZYZ e = angle_denormalize({0.5, 0.25, 0.5}, SymmetrySpec::cyclic(2));
  EXPECT_DOUBLE_EQ(e.phi3, kPi / 2);
  EXPECT_EQ(angle_channel_count(SymmetrySpec::revolution()), 2);
  EXPECT_EQ(angle_channel_count(SymmetrySpec::cyclic(4)), 3);
}

TEST(Encode, VanillaFeatureVector) {
  const ObjectModel& m = support::model("lump");
  const std::vector<Annotation> a = {at_pixel(0, 20.0, 36.0, 1.0, 0.7)};
  const EncodeResult enc = run(a, Variant::kVanilla, m);
  ASSERT_EQ(enc.captured_ids, std::vector<int>{0});
  const auto f = enc.tensor.feature(2, 4, 0);
  EXPECT_EQ(f[kPresence], 1.0);
  EXPECT_EQ(f[kVisibility], 0.7);
  EXPECT_NEAR(f[kPosX], 0.5, 1e-12);
  EXPECT_NEAR(f[kPosY], 0.5, 1e-12);
  EXPECT_NEAR(f[kPosZ], 0.5, 1e-12);
  const NormalizedAngles expect =
      angle_normalize(rotation_to_euler(a[0].pose.rotation(), m.symmetry()), m.symmetry());
  EXPECT_EQ(f[kAngle1], expect[0]);
  EXPECT_EQ(f[kAngle2], expect[1]);
  EXPECT_EQ(f[kAngle3], expect[2]);
  double others = 0.0;
  for (double x : enc.tensor.data()) others += x;
  double own = 0.0;
  for (double x : f) own += x;
  EXPECT_NEAR(others, own, 1e-12);
}

TEST(Encode, DecodeInvertsEveryVariant) {
  const ObjectModel& m = support::model("brick");
  const std::vector<Annotation> a = {at_pixel(0, 20.0, 36.0, 0.9, 0.9), at_pixel(1, 100.0, 90.0, 1.3, 0.6)};
  for (Variant v : {Variant::kVanilla, Variant::kEve, Variant::kAdditionalPoints, Variant::kZ, Variant::kMultiPose}) {
    const EncodeResult enc = run(a, v, m);
    ASSERT_EQ(enc.captured_ids.size(), 2u) << to_string(v);
    const auto hyps = decode(enc.tensor, GridSpec::defaults(v), kCam, m, 0.5);
    for (const Annotation& x : a) {
      double best = 1e9;
      for (const PoseHypothesis& h : hyps) best = std::min(best, pose_distance(h.pose, x.pose, m));
      EXPECT_LT(best, 1e-12 * m.diameter()) << to_string(v);
    }
  }
}

TEST(Encode, ConflictGoesToHigherVisibilityThenLowerId) {
  const ObjectModel& m = support::model("lump");
  std::vector<Annotation> a = {at_pixel(0, 17.0, 33.0, 1.0, 0.6), at_pixel(1, 22.0, 38.0, 1.1, 0.8)};
  EncodeResult enc = run(a, Variant::kVanilla, m);
  EXPECT_EQ(enc.captured_ids, std::vector<int>{1});
  EXPECT_EQ(enc.tensor.feature(2, 4, 0)[kVisibility], 0.8);

  a[0].visibility = 0.8;
  enc = run(a, Variant::kVanilla, m);
  EXPECT_EQ(enc.captured_ids, std::vector<int>{0});
}

TEST(Encode, ExtendedCellsNearBorders) {
  const ObjectModel& m = support::model("lump");
  // Cell (2, 4) spans u in [16, 24), v in [32, 40). x = 0.1, y = 0.9.
  const std::vector<Annotation> a = {at_pixel(0, 16.8, 39.2, 1.0, 0.9)};
  const EncodeResult enc = run(a, Variant::kEve, m);
  const GridSpec g = GridSpec::defaults(Variant::kEve);
  std::vector<std::pair<int, int>> set;
  for (std::uint32_t i = 0; i < g.sx; ++i)
    for (std::uint32_t j = 0; j < g.sy; ++j)
      if (enc.tensor.feature(i, j, 0)[kPresence] == 1.0) set.emplace_back(i, j);
  const std::vector<std::pair<int, int>> expected = {{1, 4}, {1, 5}, {2, 4}, {2, 5}};
  EXPECT_EQ(set, expected);
  // All copies carry the same enlarged-reference position.
  const Vec3 e = enlarged_normalize(a[0].pose.translation(), kCam, m.diameter());
  for (const auto& [i, j] : set) EXPECT_EQ(enc.tensor.feature(i, j, 0)[kPosX], e.x());

  // Centered origins do not extend.
  EXPECT_EQ(run({at_pixel(0, 20.0, 36.0, 1.0, 0.9)}, Variant::kEve, m).captured_ids.size(), 1u);
}

TEST(Encode, ExtensionsNeverOverwriteOrigins) {
  const ObjectModel& m = support::model("lump");
  const std::vector<Annotation> a = {at_pixel(0, 16.8, 36.0, 1.0, 1.0), at_pixel(1, 12.0, 36.0, 1.0, 0.2)};
  const EncodeResult enc = run(a, Variant::kEve, m);
  EXPECT_EQ(enc.tensor.feature(1, 4, 0)[kVisibility], 0.2);
  EXPECT_EQ(enc.tensor.feature(2, 4, 0)[kVisibility], 1.0);
  EXPECT_EQ(enc.captured_ids, (std::vector<int>{0, 1}));
}

TEST(Encode, AdditionalPointsCaptureOriginOutsideImage) {
  const ObjectModel& m = support::model("brick");
  // Object z-axis along camera +x: the +0.3 d point lands about 5 px inside.
  const Annotation a = at_pixel(0, -2.0, 60.0, 1.0, 0.9, Rotation::about_y(kPi / 2));
  const EncodeResult enc = run({a}, Variant::kAdditionalPoints, m);
  ASSERT_EQ(enc.captured_ids, std::vector<int>{0});
  ASSERT_EQ(enc.skipped.size(), 1u);
  EXPECT_EQ(enc.skipped[0].reason, SkipReason::kOriginOutOfImage);
  EXPECT_TRUE(run({a}, Variant::kVanilla, m).captured_ids.empty());
  EXPECT_TRUE(run({a}, Variant::kEve, m).captured_ids.empty());

  const auto hyps = decode(enc.tensor, GridSpec::defaults(Variant::kAdditionalPoints), kCam, m, 0.5);
  ASSERT_FALSE(hyps.empty());
  for (const auto& h : hyps) EXPECT_LT(pose_distance(h.pose, a.pose, m), 1e-12);
}

TEST(Encode, AdditionalPointsYieldToOrigins) {
  const ObjectModel& m = support::model("brick");
  const Annotation far = at_pixel(0, -2.0, 60.0, 1.0, 1.0, Rotation::about_y(kPi / 2));
  const Vec3 ap = far.pose.transform(m.additional_points()[0]);
  const CellCoords cell = cell_of(ap, kCam, GridSpec::defaults(Variant::kAdditionalPoints));
  const PixelDepth px = project(ap, kCam);
  const Annotation owner = at_pixel(1, px.u, px.v, 1.2, 0.1);
  const EncodeResult enc = run({far, owner}, Variant::kAdditionalPoints, m);
  EXPECT_EQ(enc.tensor.feature(cell.i, cell.j, 0)[kVisibility], 0.1);
}

TEST(Encode, MultiPoseChainsByVisibility) {
  const ObjectModel& m = support::model("lump");
  // All four origins fall into location (1, 2) of the 8 x 8 grid.
  const std::vector<Annotation> a = {at_pixel(0, 17.0, 33.0, 1.0, 0.5), at_pixel(1, 20.0, 40.0, 1.0, 0.9),
                                     at_pixel(2, 30.0, 46.0, 1.0, 0.7), at_pixel(3, 25.0, 35.0, 1.0, 0.3)};
  const EncodeResult enc = run(a, Variant::kMultiPose, m);
  EXPECT_EQ(enc.captured_ids, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(enc.tensor.feature(1, 2, 0)[kVisibility], 0.9);
  EXPECT_EQ(enc.tensor.feature(1, 2, 1)[kVisibility], 0.7);
  EXPECT_EQ(enc.tensor.feature(1, 2, 2)[kVisibility], 0.5);
  for (std::uint32_t b = 0; b < 3; ++b) EXPECT_EQ(enc.tensor.feature(1, 2, b)[kPresence], 1.0);

  // Decoding stops at the first absent block.
  OutputTensor t = enc.tensor;
  t.feature(1, 2, 1)[kPresence] = 0.0;
  EXPECT_EQ(decode(t, GridSpec::defaults(Variant::kMultiPose), kCam, m, 0.5).size(), 1u);
}

TEST(Encode, DepthSlicesSeparateStackedObjects) {
  const ObjectModel& m = support::model("lump");
  const std::vector<Annotation> a = {at_pixel(0, 20.0, 36.0, 0.7, 0.4), at_pixel(1, 20.0, 36.0, 1.3, 0.9)};
  EXPECT_EQ(run(a, Variant::kVanilla, m).captured_ids, std::vector<int>{1});
  const EncodeResult enc = run(a, Variant::kZ, m);
  EXPECT_EQ(enc.captured_ids, (std::vector<int>{0, 1}));
  EXPECT_EQ(enc.tensor.channels(), 8u * 16u);
  EXPECT_EQ(enc.tensor.feature(2, 4, 3)[kPresence], 1.0);   // (0.7 - 0.5) / (1 / 16) = 3.2
  EXPECT_EQ(enc.tensor.feature(2, 4, 12)[kPresence], 1.0);  // 12.8
  const auto hyps = decode(enc.tensor, GridSpec::defaults(Variant::kZ), kCam, m, 0.5);
  ASSERT_EQ(hyps.size(), 2u);
  EXPECT_EQ(hyps[0].cell.k, 3u);
  EXPECT_EQ(hyps[1].cell.k, 12u);
}

TEST(Encode, SegmentationSamplesNearestPixel) {
  const ObjectModel& m = support::model("lump");
  const std::vector<Annotation> a = {at_pixel(0, 10.0, 10.0, 1.0, 1.0), at_pixel(1, 80.0, 80.0, 1.0, 1.0)};
  RenderResult r = blank_render({1.0, 1.0});
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) r.segmentation.at(u, v) = 0;  // SI cells (0..1, 0..1) sample pixels 2 and 6
  r.segmentation.at(126, 126) = 1;                            // cell 31 samples pixel 126
  const EncodeResult enc = run(a, Variant::kSegmentation, m, r);
  EXPECT_EQ(enc.captured_ids, (std::vector<int>{0, 1}));
  EXPECT_EQ(enc.tensor.feature(0, 0, 0)[kPresence], 1.0);
  EXPECT_EQ(enc.tensor.feature(1, 1, 0)[kPresence], 1.0);
  EXPECT_EQ(enc.tensor.feature(2, 2, 0)[kPresence], 0.0);
  EXPECT_EQ(enc.tensor.feature(31, 31, 0)[kPresence], 1.0);
  const LabelImage low = downsample_segmentation(r.segmentation, kCam, GridSpec::defaults(Variant::kSegmentation));
  EXPECT_EQ(low.at(1, 1), 0);
  EXPECT_EQ(low.at(31, 31), 1);
  EXPECT_EQ(low.at(5, 5), kBackground);

  r.segmentation.at(62, 62) = 7;  // sampled by cell 15
  EXPECT_THROW(run(a, Variant::kSegmentation, m, r), Error);
}

TEST(Encode, SkipsOriginsOutsideDepthRange) {
  const ObjectModel& m = support::model("lump");
  const EncodeResult enc = run({at_pixel(0, 20.0, 20.0, 1.7, 1.0)}, Variant::kVanilla, m);
  EXPECT_TRUE(enc.captured_ids.empty());
  ASSERT_EQ(enc.skipped.size(), 1u);
  EXPECT_EQ(enc.skipped[0].reason, SkipReason::kOriginOutOfFrustum);
}

TEST(Encode, RejectsInconsistentAnnotations) {
  const ObjectModel& m = support::model("lump");
  const std::vector<Annotation> dup = {at_pixel(0, 20.0, 20.0, 1.0, 1.0), at_pixel(0, 50.0, 20.0, 1.0, 1.0)};
  try {
    run(dup, Variant::kVanilla, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSceneMismatch);
  }
  EXPECT_THROW(run({at_pixel(3, 20.0, 20.0, 1.0, 1.0)}, Variant::kVanilla, m, blank_render({1.0})), Error);
}

TEST(Decode, ValidatesInputs) {
  const ObjectModel& m = support::model("lump");
  const GridSpec g = GridSpec::defaults(Variant::kVanilla);
  try {
    decode(OutputTensor(16, 16, 16), g, kCam, m, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
  EXPECT_THROW(decode(OutputTensor::zeros(g), g, kCam, m, 1.5), Error);
  EXPECT_TRUE(decode(OutputTensor::zeros(g), g, kCam, m, 0.5).empty());

  OutputTensor t = OutputTensor::zeros(g);
  auto f = t.feature(3, 3, 0);
  f[kPresence] = 0.9;
  f[kPosX] = std::nan("");
  EXPECT_TRUE(decode(t, g, kCam, m, 0.5).empty());
  f[kPosX] = 0.5;
  const auto hyps = decode(t, g, kCam, m, 0.5);
  ASSERT_EQ(hyps.size(), 1u);
  EXPECT_EQ(hyps[0].confidence, 0.9);
  EXPECT_EQ(hyps[0].cell.i, 3u);
}

TEST(Codecs, RandomScenesRoundTrip) {
  io::ExperimentConfig cfg;
  for (const char* name : {"lump", "brick"}) {
    cfg.model = preset_model(name);
    auto model = std::make_shared<const ObjectModel>(build_model(cfg.model));
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
      const io::SceneRecord s = cli::make_scene(cfg, model, seed);
      for (Variant v : kAllVariants) {
        const auto r = cli::run_pipeline(s, cfg.grid(v), 0.5, cfg.cluster_params(*model));
        EXPECT_EQ(r.predictions.size(), r.encoded.captured_ids.size()) << name << " " << to_string(v);
        for (int id : r.encoded.captured_ids) {
          double best = 1e9;
          for (const auto& p : r.predictions) best = std::min(best, pose_distance(p.pose, s.annotations[id].pose, *model));
          EXPECT_LT(best, 1e-9 * model->diameter());
        }
      }
    }
  }
}

TEST(Coverage, CountsEligibleObjects) {
  const ObjectModel& m = support::model("lump");
  const std::vector<Annotation> a = {at_pixel(0, 17.0, 33.0, 1.0, 0.6), at_pixel(1, 22.0, 38.0, 1.1, 0.8),
                                     at_pixel(2, 80.0, 80.0, 1.0, 0.2)};
  const std::vector<GridSpec> grids = {GridSpec::defaults(Variant::kVanilla), GridSpec::defaults(Variant::kZ)};
  const auto report = coverage_report(a, blank_render(visibilities(a)), m, kCam, grids, 0.5);
  ASSERT_EQ(report.size(), 2u);
  EXPECT_EQ(report[0].eligible, 2u);
  EXPECT_EQ(report[0].captured, 1u);
  EXPECT_EQ(report[0].missed_ids, std::vector<int>{0});
  EXPECT_EQ(report[1].missed, 0u);
}
