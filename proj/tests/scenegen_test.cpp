#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "posegrid/scenegen.hpp"
#include "support.hpp"

using namespace posegrid;

namespace {

std::shared_ptr<const ObjectModel> ball(double radius) {
  ModelDefinition def;
  def.name = "ball";
  def.symmetry = SymmetrySpec::none();
  def.spheres = {{Vec3::Zero(), radius}};
  return std::make_shared<const ObjectModel>(build_model(def));
}

Scene scene_of(std::shared_ptr<const ObjectModel> model, std::vector<Vec3> origins) {
  Scene s;
  s.model = std::move(model);
  for (std::size_t i = 0; i < origins.size(); ++i) s.objects.push_back({static_cast<int>(i), Pose(Rotation(), origins[i])});
  return s;
}

}  // namespace

TEST(SampleScene, DeterministicAndInsideBounds) {
  auto model = std::make_shared<const ObjectModel>(support::model("brick"));
  const BinBounds bounds;
  const Scene a = sample_scene(42, model, 25, bounds, CameraIntrinsics{});
  const Scene b = sample_scene(42, model, 25, bounds, CameraIntrinsics{});
  ASSERT_EQ(a.objects.size(), 25u);
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    EXPECT_EQ(a.objects[i].id, static_cast<int>(i));
    EXPECT_EQ(a.objects[i].pose.translation(), b.objects[i].pose.translation());
    EXPECT_EQ(a.objects[i].pose.rotation(), b.objects[i].pose.rotation());
    const Vec3& t = a.objects[i].pose.translation();
    for (int c = 0; c < 3; ++c) {
      EXPECT_GE(t[c], bounds.min[c]);
      EXPECT_LE(t[c], bounds.max[c]);
    }
  }
  const Scene c = sample_scene(43, model, 25, bounds, CameraIntrinsics{});
  EXPECT_NE(a.objects[0].pose.translation(), c.objects[0].pose.translation());
}

TEST(SampleScene, RejectsBadBounds) {
  auto model = std::make_shared<const ObjectModel>(support::model("brick"));
  BinBounds b;
  b.max.z() = 2.0;
  EXPECT_THROW(sample_scene(1, model, 3, b, CameraIntrinsics{}), Error);
  b = BinBounds{};
  b.min.x() = 5.0;
  b.max.x() = 6.0;
  EXPECT_THROW(sample_scene(1, model, 3, b, CameraIntrinsics{}), Error);
  EXPECT_THROW(sample_scene(1, nullptr, 3, BinBounds{}, CameraIntrinsics{}), Error);
  EXPECT_THROW(sample_scene(1, model, -1, BinBounds{}, CameraIntrinsics{}), Error);
}

TEST(Render, SphereAreaMatchesCircleOracle) {
  // On the optical axis a sphere projects to a disc of radius f r / sqrt(z^2 - r^2).
  const double r = 0.05, z = 1.0;
  const Scene s = scene_of(ball(r), {Vec3(0.0, 0.0, z)});
  const RenderResult out = render(s);
  const double disc = 140.0 * r / std::sqrt(z * z - r * r);
  const double area = kPi * disc * disc;
  EXPECT_NEAR(static_cast<double>(out.alone_pixels[0]), area, 0.02 * area);
  EXPECT_EQ(out.visibility[0], 1.0);
  EXPECT_NEAR(out.depth.at(64, 64), z - r, 1e-3);
  EXPECT_EQ(out.segmentation.at(64, 64), 0);
  EXPECT_EQ(out.segmentation.at(0, 0), kBackground);
  EXPECT_EQ(out.depth.at(0, 0), 0.0);
}

TEST(Render, HalfOutsideImageIsFullyVisibleWhenClipped) {
  const double r = 0.05, z = 1.0;
  // Center exactly on the left image border.
  const Scene s = scene_of(ball(r), {Vec3(-64.0 / 140.0 * z, 0.0, z)});
  const RenderResult out = render(s);
  EXPECT_EQ(out.visibility[0], 1.0);
  EXPECT_NEAR(out.visibility_unclipped[0], 0.5, 0.03);
  RenderOptions opt;
  opt.unclipped_visibility = true;
  EXPECT_NEAR(render(s, opt).visibility[0], 0.5, 0.03);
}

TEST(Render, OcclusionReducesVisibility) {
  const Scene s = scene_of(ball(0.05), {Vec3(0.0, 0.0, 1.2), Vec3(0.03, 0.0, 0.9), Vec3(0.3, 0.3, 1.0)});
  const RenderResult out = render(s);
  EXPECT_LT(out.visibility[0], 0.8);
  EXPECT_GT(out.visibility[0], 0.0);
  EXPECT_EQ(out.visibility[1], 1.0);
  EXPECT_EQ(out.visibility[2], 1.0);
  EXPECT_EQ(out.visible_pixels[1], out.alone_pixels[1]);
  std::size_t labelled = 0;
  for (std::int32_t l : out.segmentation.data()) labelled += l == kBackground ? 0 : 1;
  EXPECT_EQ(labelled, out.visible_pixels[0] + out.visible_pixels[1] + out.visible_pixels[2]);
}

TEST(Render, AnnotationCarriesVisibility) {
  auto model = std::make_shared<const ObjectModel>(support::model("lump"));
  const Scene s = sample_scene(7, model, 12, BinBounds{}, CameraIntrinsics{});
  const RenderResult out = render(s);
  const auto ann = annotate(s, out);
  ASSERT_EQ(ann.size(), 12u);
  for (std::size_t i = 0; i < ann.size(); ++i) {
    EXPECT_EQ(ann[i].visibility, out.visibility[i]);
    EXPECT_GE(ann[i].visibility, 0.0);
    EXPECT_LE(ann[i].visibility, 1.0);
  }
  RenderResult wrong = out;
  wrong.visibility.pop_back();
  EXPECT_THROW(annotate(s, wrong), Error);
}

TEST(Noise, DeterministicDropoutAndNoise) {
  DepthImage d(64, 64, 1.0);
  NoiseConfig cfg;
  cfg.dropout = 0.2;
  cfg.sigma = 0.01;
  const DepthImage a = corrupt_depth(d, cfg, 5);
  EXPECT_EQ(a, corrupt_depth(d, cfg, 5));
  EXPECT_NE(a, corrupt_depth(d, cfg, 6));
  std::size_t zeros = 0;
  for (double z : a.data()) zeros += z == 0.0 ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(zeros) / a.size(), 0.2, 0.03);
  EXPECT_EQ(corrupt_depth(d, NoiseConfig{}, 1), d);
  cfg.dropout = 1.5;
  EXPECT_THROW(corrupt_depth(d, cfg, 1), Error);
}

TEST(Noise, BlurAveragesValidNeighborsOnly) {
  DepthImage d(5, 1, 0.0);
  d.at(1, 0) = 1.0;
  d.at(2, 0) = 2.0;
  NoiseConfig cfg;
  cfg.blur_radius = 1;
  const DepthImage out = corrupt_depth(d, cfg, 0);
  EXPECT_DOUBLE_EQ(out.at(1, 0), 1.5);
  EXPECT_DOUBLE_EQ(out.at(2, 0), 1.5);
  EXPECT_EQ(out.at(3, 0), 0.0);
}

TEST(Interpolate, RecoversLinearRamp) {
  DepthImage ramp(16, 16);
  for (int v = 0; v < 16; ++v)
    for (int u = 0; u < 16; ++u) ramp.at(u, v) = 1.0 + 0.01 * u + 0.02 * v;
  DepthImage holes = ramp;
  for (int v = 3; v < 9; ++v)
    for (int u = 4; u < 12; ++u) holes.at(u, v) = 0.0;
  const DepthImage filled = interpolate_missing(holes);
  for (int v = 0; v < 16; ++v)
    for (int u = 0; u < 16; ++u) EXPECT_NEAR(filled.at(u, v), ramp.at(u, v), 1e-12);
}

TEST(Interpolate, FillsBordersAndRejectsEmpty) {
  DepthImage d(8, 8, 0.0);
  d.at(0, 0) = 2.0;
  const DepthImage filled = interpolate_missing(d);
  for (double z : filled.data()) EXPECT_EQ(z, 2.0);
  EXPECT_THROW(interpolate_missing(DepthImage(4, 4, 0.0)), Error);
}
