#include <gtest/gtest.h>

#include <optional>
#include <random>

#include "posegrid/cli.hpp"
#include "posegrid/io.hpp"
#include "support.hpp"

using namespace posegrid;
namespace fs = std::filesystem;

namespace {

std::optional<ErrorCode> code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

std::string message_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

void put_u32(std::string& bytes, std::size_t at, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) bytes[at + b] = static_cast<char>((v >> (8 * b)) & 0xFFu);
}

}  // namespace

TEST(TensorFile, HeaderLayout) {
  OutputTensor t(2, 3, 8);
  const std::string bytes = io::serialize_tensor(t);
  ASSERT_EQ(bytes.size(), 76u + 4u * 48u);
  EXPECT_EQ(bytes.substr(0, 16), std::string("POSEGRID-TENSOR\0", 16));
  EXPECT_EQ(bytes[16], 1);
  EXPECT_EQ(bytes[20], 1);
  for (std::size_t i = 24; i < 64; ++i) ASSERT_EQ(bytes[i], 0);
  EXPECT_EQ(bytes[64], 2);
  EXPECT_EQ(bytes[68], 3);
  EXPECT_EQ(bytes[72], 8);
}

TEST(TensorFile, RoundTripIsBitExactForFloatValues) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(-10.0f, 10.0f);
  OutputTensor t(4, 5, 16);
  for (double& x : t.data()) x = u(rng);
  t.data()[0] = -0.0;
  support::TempDir dir("tensor");
  io::save_tensor(dir / "a.tensor", t);
  const OutputTensor back = io::load_tensor(dir / "a.tensor");
  ASSERT_EQ(back.sx(), 4u);
  ASSERT_EQ(back.channels(), 16u);
  for (std::size_t k = 0; k < t.size(); ++k)
    ASSERT_EQ(std::bit_cast<std::uint64_t>(back.data()[k]), std::bit_cast<std::uint64_t>(t.data()[k]));
  EXPECT_FALSE(fs::exists(dir / "a.tensor.tmp"));
  EXPECT_EQ(io::read_file(dir / "a.tensor"), io::serialize_tensor(back));
}

TEST(TensorFile, MalformedFieldsAreNamed) {
  const std::string good = io::serialize_tensor(OutputTensor(2, 2, 8));
  std::string bad = good;
  bad[3] = 'X';
  EXPECT_NE(message_of([&] { io::deserialize_tensor(bad, "f"); }).find(": magic:"), std::string::npos);
  bad = good;
  put_u32(bad, 16, 7);
  EXPECT_NE(message_of([&] { io::deserialize_tensor(bad, "f"); }).find(": version:"), std::string::npos);
  bad = good;
  put_u32(bad, 20, 9);
  EXPECT_NE(message_of([&] { io::deserialize_tensor(bad, "f"); }).find(": element type:"), std::string::npos);
  bad = good.substr(0, good.size() - 4);
  EXPECT_NE(message_of([&] { io::deserialize_tensor(bad, "f"); }).find(": payload length:"), std::string::npos);
  EXPECT_EQ(code_of([&] { io::deserialize_tensor(bad, "f"); }), ErrorCode::kMalformedFile);
  EXPECT_NE(message_of([&] { io::deserialize_tensor(good.substr(0, 30), "f"); }).find(": header:"),
            std::string::npos);
  EXPECT_EQ(code_of([] { io::load_tensor("/nonexistent/x.tensor"); }), ErrorCode::kMissingFile);
}

TEST(TensorFile, RasterTypesAreChecked) {
  support::TempDir dir("raster");
  DepthImage d(3, 2, 0.5);
  d.at(2, 1) = 1.25;
  LabelImage l(3, 2, kBackground);
  l.at(1, 0) = 7;
  io::save_depth(dir / "d.bin", d);
  io::save_labels(dir / "l.bin", l);
  EXPECT_EQ(io::load_depth(dir / "d.bin"), d);
  EXPECT_EQ(io::load_labels(dir / "l.bin"), l);
  EXPECT_EQ(code_of([&] { io::load_depth(dir / "l.bin"); }), ErrorCode::kMalformedFile);
  // Raster index is u * H + v.
  const io::RawTensor raw = io::decode_container(io::read_file(dir / "l.bin"), "l");
  EXPECT_EQ(raw.dims[0], 3u);
  EXPECT_EQ(raw.dims[1], 2u);
  EXPECT_EQ(static_cast<std::int32_t>(raw.words[1 * 2 + 0]), 7);
}

TEST(SceneFile, RoundTrip) {
  io::ExperimentConfig cfg;
  cfg.min_objects = cfg.max_objects = 6;
  auto model = std::make_shared<const ObjectModel>(build_model(cfg.model));
  const io::SceneRecord s = cli::make_scene(cfg, model, 3);
  support::TempDir dir("scene");
  io::save_scene(dir.path(), s);
  const io::SceneRecord back = io::load_scene(dir / (s.scene_id + ".json"));
  EXPECT_EQ(back.scene_id, "scene_000003");
  EXPECT_EQ(back.seed, 3u);
  EXPECT_EQ(back.camera, s.camera);
  ASSERT_EQ(back.annotations.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_LT((back.annotations[i].pose.translation() - s.annotations[i].pose.translation()).norm(), 1e-15);
    EXPECT_TRUE(back.annotations[i].pose.rotation().is_approx(s.annotations[i].pose.rotation(), 1e-15));
    EXPECT_EQ(back.annotations[i].visibility, s.annotations[i].visibility);
  }
  EXPECT_EQ(back.segmentation, s.segmentation);
  EXPECT_EQ(back.grids.at(Variant::kZ), s.grids.at(Variant::kZ));
  EXPECT_EQ(back.model->surface_points().size(), model->surface_points().size());
  EXPECT_EQ(io::list_scene_files(dir.path()).size(), 1u);
}

TEST(SceneFile, RejectsBadContent) {
  io::ExperimentConfig cfg;
  cfg.min_objects = cfg.max_objects = 2;
  auto model = std::make_shared<const ObjectModel>(build_model(cfg.model));
  support::TempDir dir("badscene");
  io::save_scene(dir.path(), cli::make_scene(cfg, model, 1));
  const fs::path path = dir / "scene_000001.json";
  const nlohmann::json original = io::parse_json(io::read_file(path), "x");

  nlohmann::json doc = original;
  doc["objects"][0]["quaternion"] = {1.0, 0.1, 0.0, 0.0};
  io::write_file_atomic(path, doc.dump());
  const std::string msg = message_of([&] { io::load_scene(path); });
  EXPECT_NE(msg.find("objects[0].quaternion"), std::string::npos) << msg;
  EXPECT_EQ(code_of([&] { io::load_scene(path); }), ErrorCode::kMalformedFile);

  doc = original;
  doc["objects"][1]["visibility"] = 1.5;
  io::write_file_atomic(path, doc.dump());
  EXPECT_EQ(code_of([&] { io::load_scene(path); }), ErrorCode::kMalformedFile);

  doc = original;
  doc["camera"]["width"] = 64;
  io::write_file_atomic(path, doc.dump());
  EXPECT_EQ(code_of([&] { io::load_scene(path); }), ErrorCode::kDimensionMismatch);

  doc = original;
  doc["format"] = "something-else";
  io::write_file_atomic(path, doc.dump());
  EXPECT_EQ(code_of([&] { io::load_scene(path); }), ErrorCode::kMalformedFile);

  io::write_file_atomic(path, "{ not json");
  EXPECT_EQ(code_of([&] { io::load_scene(path); }), ErrorCode::kMalformedFile);
  EXPECT_EQ(code_of([&] { io::load_scene(dir / "missing.json"); }), ErrorCode::kMissingFile);
  EXPECT_EQ(code_of([&] { io::list_scene_files(dir / "nope"); }), ErrorCode::kMissingFile);
}

TEST(Config, DefaultRoundTrip) {
  const io::ExperimentConfig c;
  const nlohmann::json j = io::to_json(c);
  const io::ExperimentConfig back = io::config_from_json(j);
  EXPECT_EQ(io::to_json(back), j);
  EXPECT_EQ(back.grid(Variant::kMultiPose).poses, 3u);
  EXPECT_EQ(back.loss.lambda1, 0.1);
  EXPECT_EQ(back.eval.visibility_cutoff, 0.5);
}

TEST(Config, PartialAndInvalid) {
  const io::ExperimentConfig c = io::config_from_json(
      io::parse_json(R"({"model": "lump", "cluster": {"eps": 0.01, "min_points": 2},
                         "grids": {"z": {"sz": 4}}})", "x"));
  EXPECT_EQ(c.model.name, "lump");
  EXPECT_EQ(*c.eps, 0.01);
  EXPECT_EQ(c.min_points, 2u);
  EXPECT_EQ(c.grid(Variant::kZ).sz, 4u);
  EXPECT_EQ(c.grid(Variant::kZ).sx, 16u);

  auto code = [](const char* text) { return code_of([&] { io::config_from_json(io::parse_json(text, "x")); }); };
  EXPECT_EQ(code(R"({"colour": 1})"), ErrorCode::kMalformedFile);
  EXPECT_EQ(code(R"({"loss": {"lambda5": 1}})"), ErrorCode::kMalformedFile);
  EXPECT_EQ(code(R"({"decode_threshold": 2})"), ErrorCode::kMalformedFile);
  EXPECT_EQ(code(R"({"objects_per_scene": [5, 2]})"), ErrorCode::kMalformedFile);
  EXPECT_EQ(code(R"({"model": "teapot"})"), ErrorCode::kMalformedFile);
  EXPECT_EQ(code(R"({"camera": {"fu": -1}})"), ErrorCode::kMalformedFile);
  EXPECT_NE(message_of([] { io::config_from_json(io::parse_json(R"({"loss": {"lambda5": 1}})", "x")); })
                .find("loss.lambda5"),
            std::string::npos);
}

TEST(Predictions, RoundTrip) {
  std::mt19937_64 rng(12);
  std::vector<io::ScenePredictions> scenes(2);
  scenes[0].scene_id = "a";
  scenes[1].scene_id = "b";
  for (int n = 0; n < 3; ++n) {
    FinalPrediction p;
    p.pose = support::random_pose(rng);
    p.confidence = 0.25 * (n + 1);
    p.support = n + 1;
    scenes[0].predictions.push_back(p);
  }
  support::TempDir dir("pred");
  io::write_file_atomic(dir / "p.json", io::predictions_to_json(scenes, {{"variant", "ap"}}).dump());
  const auto back = io::load_predictions(dir / "p.json");
  ASSERT_EQ(back.size(), 2u);
  ASSERT_EQ(back[0].predictions.size(), 3u);
  EXPECT_TRUE(back[1].predictions.empty());
  for (int n = 0; n < 3; ++n) {
    EXPECT_EQ(back[0].predictions[n].pose.translation(), scenes[0].predictions[n].pose.translation());
    EXPECT_EQ(back[0].predictions[n].confidence, scenes[0].predictions[n].confidence);
    EXPECT_EQ(back[0].predictions[n].support, scenes[0].predictions[n].support);
  }
  nlohmann::json doc = io::predictions_to_json(scenes, {});
  doc["scenes"][0]["predictions"][1]["confidence"] = 1.5;
  io::write_file_atomic(dir / "bad.json", doc.dump());
  EXPECT_EQ(code_of([&] { io::load_predictions(dir / "bad.json"); }), ErrorCode::kMalformedFile);
}
