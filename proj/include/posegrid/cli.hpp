#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "posegrid/codecs.hpp"
#include "posegrid/error.hpp"
#include "posegrid/eval.hpp"
#include "posegrid/io.hpp"
#include "posegrid/loss.hpp"
#include "posegrid/postprocess.hpp"
#include "posegrid/scenegen.hpp"

namespace posegrid::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Pipeline pieces shared by the commands
// ---------------------------------------------------------------------------

inline std::string scene_name(std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%06llu", static_cast<unsigned long long>(seed));
  return buf;
}

/// One synthetic scene per seed. The seed fixes the object count, the poses and the noise.
inline io::SceneRecord make_scene(const io::ExperimentConfig& cfg, std::shared_ptr<const ObjectModel> model,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(cfg.min_objects, cfg.max_objects);
  const int n = count(rng);
  const std::uint64_t pose_seed = rng();
  const std::uint64_t noise_seed = rng();
  Scene scene = sample_scene(pose_seed, model, n, cfg.bin, cfg.camera);
  scene.seed = seed;
  const RenderResult rendered = render(scene);

  io::SceneRecord rec;
  rec.scene_id = scene_name(seed);
  rec.seed = seed;
  rec.camera = cfg.camera;
  rec.model_definition = cfg.model;
  rec.model = std::move(model);
  rec.grids = cfg.grids;
  rec.annotations = annotate(scene, rendered);
  rec.depth = cfg.noise.is_identity() ? rendered.depth : corrupt_depth(rendered.depth, cfg.noise, noise_seed);
  rec.segmentation = rendered.segmentation;
  return rec;
}

struct PipelineResult {
  EncodeResult encoded;
  std::vector<PoseHypothesis> hypotheses;
  std::vector<FinalPrediction> predictions;
};

/// encode -> decode -> cluster on one scene, all in memory.
inline PipelineResult run_pipeline(const io::SceneRecord& s, const GridSpec& grid, double threshold,
                                   const ClusterParams& params) {
  PipelineResult r;
  const RenderResult rendered = s.render_result();
  r.encoded = encode_detailed(s.annotations, rendered, *s.model, s.camera, grid);
  r.hypotheses = decode(r.encoded.tensor, grid, s.camera, *s.model, threshold);
  r.predictions = cluster(r.hypotheses, params, *s.model);
  return r;
}

/// True when each object has an additional point whose cell lies in the grid.
inline bool every_object_has_additional_point(const io::SceneRecord& s, const GridSpec& grid) {
  for (const Annotation& a : s.annotations) {
    bool any = false;
    for (const Vec3& p : s.model->additional_points())
      any = any || locate_cell(a.pose.transform(p), s.camera, grid).status == CellStatus::kInside;
    if (!any) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Round-trip report
// ---------------------------------------------------------------------------

struct RoundtripOptions {
  std::optional<double> threshold;  ///< defaults to the config
  /// Recovery tolerance as a fraction of the object diameter.
  double recovery_fraction = 1e-5;
};

struct VariantSummary {
  Variant variant = Variant::kVanilla;
  GridSpec grid;
  std::size_t objects = 0;
  std::size_t eligible = 0;  ///< visibility >= cutoff
  std::size_t captured_eligible = 0;
  std::size_t missed = 0;    ///< eligible but not in the GT tensor
  std::size_t captured = 0;  ///< any visibility
  std::size_t recovered = 0; ///< captured and recovered within tolerance
  double max_error = 0.0;    ///< worst recovery distance / diameter over captured objects
  std::size_t predictions = 0;
  double ap_captured = 0.0;  ///< AP with the captured objects as ground truth
  double ap = 0.0;           ///< AP against all ground truth with the visibility cutoff
  std::vector<std::size_t> missed_per_scene;
};

struct RoundtripReport {
  std::size_t scenes = 0;
  std::vector<std::uint64_t> seeds;
  std::string model_name;
  double visibility_cutoff = 0.5;
  std::vector<VariantSummary> variants;
  /// Scenes in which every object has an additional point inside the grid,
  /// and the misses of the AP variant within those scenes.
  std::size_t ap_covered_scenes = 0;
  std::size_t ap_covered_misses = 0;

  const VariantSummary* find(Variant v) const {
    for (const VariantSummary& s : variants)
      if (s.variant == v) return &s;
    return nullptr;
  }
};

inline RoundtripReport roundtrip(const io::ExperimentConfig& cfg, std::span<const std::uint64_t> seeds,
                                 std::span<const Variant> variants, const RoundtripOptions& options = {}) {
  auto model = std::make_shared<const ObjectModel>(build_model(cfg.model));
  const ClusterParams params = cfg.cluster_params(*model);
  const double threshold = options.threshold.value_or(cfg.decode_threshold);
  const double tolerance = options.recovery_fraction * model->diameter();

  RoundtripReport report;
  report.seeds.assign(seeds.begin(), seeds.end());
  report.scenes = seeds.size();
  report.model_name = model->name();
  report.visibility_cutoff = cfg.eval.visibility_cutoff;
  std::vector<std::vector<SceneEvaluationInput>> captured_inputs(variants.size()), full_inputs(variants.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    VariantSummary s;
    s.variant = variants[v];
    s.grid = cfg.grid(variants[v]);
    report.variants.push_back(s);
  }

  for (std::uint64_t seed : seeds) {
    const io::SceneRecord scene = make_scene(cfg, model, seed);
    const std::vector<GroundTruth> gts = scene.ground_truth();
    bool ap_covered = false;
    for (std::size_t v = 0; v < variants.size(); ++v) {
      VariantSummary& sum = report.variants[v];
      const PipelineResult r = run_pipeline(scene, sum.grid, threshold, params);
      const auto& ids = r.encoded.captured_ids;
      std::vector<GroundTruth> captured_gt;
      std::size_t scene_missed = 0;
      for (const Annotation& a : scene.annotations) {
        ++sum.objects;
        const bool eligible = a.visibility >= cfg.eval.visibility_cutoff;
        const bool captured = std::binary_search(ids.begin(), ids.end(), a.id);
        if (eligible) ++sum.eligible;
        if (eligible && captured) ++sum.captured_eligible;
        if (eligible && !captured) ++scene_missed;
        if (!captured) continue;
        ++sum.captured;
        captured_gt.push_back({a.pose, 1.0});
        double best = std::numeric_limits<double>::infinity();
        for (const FinalPrediction& p : r.predictions) best = std::min(best, pose_distance(p.pose, a.pose, *model));
        if (best < tolerance) ++sum.recovered;
        sum.max_error = std::max(sum.max_error, best / model->diameter());
      }
      sum.missed += scene_missed;
      sum.missed_per_scene.push_back(scene_missed);
      sum.predictions += r.predictions.size();
      captured_inputs[v].push_back({scene.scene_id, model.get(), r.predictions, std::move(captured_gt)});
      full_inputs[v].push_back({scene.scene_id, model.get(), r.predictions, gts});
      if (sum.variant == Variant::kAdditionalPoints) {
        ap_covered = every_object_has_additional_point(scene, sum.grid);
        if (ap_covered) report.ap_covered_misses += scene_missed;
      }
    }
    if (ap_covered) ++report.ap_covered_scenes;
  }
  for (std::size_t v = 0; v < variants.size(); ++v) {
    report.variants[v].ap_captured = evaluate_dataset(captured_inputs[v], cfg.eval).pooled.ap;
    report.variants[v].ap = evaluate_dataset(full_inputs[v], cfg.eval).pooled.ap;
  }
  return report;
}

/// The coverage ordering checks that apply to the variants in the report.
inline std::vector<std::pair<std::string, bool>> coverage_ordering(const RoundtripReport& r) {
  std::vector<std::pair<std::string, bool>> out;
  auto check = [&](Variant lo, Variant hi) {
    const VariantSummary* a = r.find(lo);
    const VariantSummary* b = r.find(hi);
    if (a && b) out.emplace_back(std::string(to_string(lo)) + " <= " + to_string(hi), a->missed <= b->missed);
  };
  check(Variant::kAdditionalPoints, Variant::kEve);
  check(Variant::kEve, Variant::kVanilla);
  check(Variant::kZ, Variant::kVanilla);
  check(Variant::kMultiPose, Variant::kVanilla);
  return out;
}

inline std::string grid_label(const GridSpec& g) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%ux%ux%ux%u", g.sx, g.sy, g.sz, g.poses);
  return buf;
}

inline json to_json(const RoundtripReport& r) {
  json variants = json::array();
  for (const VariantSummary& s : r.variants) {
    variants.push_back({{"variant", to_string(s.variant)},
                        {"grid", io::to_json(s.grid)},
                        {"objects", s.objects},
                        {"eligible", s.eligible},
                        {"captured_eligible", s.captured_eligible},
                        {"missed", s.missed},
                        {"captured", s.captured},
                        {"recovered", s.recovered},
                        {"max_error_fraction", s.max_error},
                        {"predictions", s.predictions},
                        {"ap_captured", s.ap_captured},
                        {"ap", s.ap}});
  }
  json ordering = json::object();
  for (const auto& [name, ok] : coverage_ordering(r)) ordering[name] = ok;
  return {{"format", "posegrid-roundtrip"},
          {"version", io::kSceneVersion},
          {"model", r.model_name},
          {"scenes", r.scenes},
          {"seeds", r.seeds},
          {"visibility_cutoff", r.visibility_cutoff},
          {"variants", variants},
          {"ordering", ordering},
          {"ap_covered_scenes", r.ap_covered_scenes},
          {"ap_covered_misses", r.ap_covered_misses}};
}

inline void print_table(std::ostream& out, const RoundtripReport& r) {
  char line[256];
  std::snprintf(line, sizeof line, "round trip: %zu scenes, model %s, visibility cutoff %.2f\n", r.scenes,
                r.model_name.c_str(), r.visibility_cutoff);
  out << line;
  std::snprintf(line, sizeof line, "%-8s %-12s %8s %8s %7s %9s %9s %11s %11s %8s\n", "variant", "grid", "eligible",
                "captured", "missed", "all_capt", "recovered", "max_err/d", "ap_captured", "ap");
  out << line;
  for (const VariantSummary& s : r.variants) {
    std::snprintf(line, sizeof line, "%-8s %-12s %8zu %8zu %7zu %9zu %9zu %11.3e %11.6f %8.6f\n", to_string(s.variant),
                  grid_label(s.grid).c_str(), s.eligible, s.captured_eligible, s.missed, s.captured, s.recovered,
                  s.max_error, s.ap_captured, s.ap);
    out << line;
  }
  for (const auto& [name, ok] : coverage_ordering(r)) out << "missed(" << name << "): " << (ok ? "yes" : "NO") << "\n";
  if (r.find(Variant::kAdditionalPoints))
    out << "ap misses in " << r.ap_covered_scenes << " scenes with an in-grid additional point per object: "
        << r.ap_covered_misses << "\n";
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Writes scenes for seeds seed .. seed + count - 1.
inline std::vector<fs::path> run_generate(const io::ExperimentConfig& cfg, std::uint64_t seed, std::size_t count,
                                          const fs::path& out_dir) {
  auto model = std::make_shared<const ObjectModel>(build_model(cfg.model));
  std::vector<fs::path> written;
  for (std::size_t n = 0; n < count; ++n) {
    const io::SceneRecord s = make_scene(cfg, model, seed + n);
    io::save_scene(out_dir, s);
    written.push_back(out_dir / (s.scene_id + ".json"));
  }
  return written;
}

inline constexpr const char* kManifestFormat = "posegrid-tensors";

/// Encodes every scene of a directory; writes <scene>.<variant>.tensor plus
/// manifest.json holding what decoding needs.
inline void run_encode(const fs::path& scenes_dir, Variant variant, const fs::path& out_dir, std::ostream& log) {
  const auto files = io::list_scene_files(scenes_dir);
  json scenes = json::array();
  std::optional<io::SceneRecord> first;
  for (const fs::path& f : files) {
    io::SceneRecord s = io::load_scene(f);
    const GridSpec grid = s.grids.at(variant);
    if (first) {
      if (!(s.camera == first->camera) || !(grid == first->grids.at(variant)) ||
          io::to_json(s.model_definition, *s.model) != io::to_json(first->model_definition, *first->model))
        throw Error(ErrorCode::kSceneMismatch,
                    "scene '" + f.string() + "': camera, grid or model differs from the first scene");
    }
    const EncodeResult enc = encode_detailed(s.annotations, s.render_result(), *s.model, s.camera, grid);
    const std::string name = s.scene_id + "." + to_string(variant) + ".tensor";
    io::save_tensor(out_dir / name, enc.tensor);
    json skipped = json::array();
    for (const EncodeSkip& k : enc.skipped) skipped.push_back({{"id", k.id}, {"reason", to_string(k.reason)}});
    scenes.push_back({{"scene_id", s.scene_id}, {"tensor", name}, {"captured_ids", enc.captured_ids},
                      {"skipped", skipped}});
    log << s.scene_id << ": " << enc.captured_ids.size() << " of " << s.annotations.size() << " objects encoded\n";
    if (!first) first = std::move(s);
  }
  if (!first) throw Error(ErrorCode::kMissingFile, "no scene files in '" + scenes_dir.string() + "'");
  const json manifest = {{"format", kManifestFormat},
                         {"version", io::kSceneVersion},
                         {"variant", to_string(variant)},
                         {"grid", io::to_json(first->grids.at(variant))},
                         {"camera", io::to_json(first->camera)},
                         {"model", io::to_json(first->model_definition, *first->model)},
                         {"scenes", scenes}};
  io::write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

struct DecodeSettings {
  double threshold = 0.5;
  std::optional<double> eps;  ///< meters
  double eps_fraction = 0.1;
  std::size_t min_points = 1;
  double confidence_threshold = 0.0;
};

/// Decodes and clusters every tensor listed in the manifest.
inline std::vector<io::ScenePredictions> run_decode(const fs::path& tensors_dir, Variant variant,
                                                    const DecodeSettings& settings, const fs::path& out_path) {
  const fs::path manifest_path = tensors_dir / "manifest.json";
  const json doc = io::parse_json(io::read_file(manifest_path), manifest_path.string());
  std::vector<io::ScenePredictions> out;
  json meta;
  try {
    const io::Reader r(doc, "");
    if (r.get<std::string>("format") != kManifestFormat) r.fail("format", "is not " + std::string(kManifestFormat));
    const std::string stored = r.get<std::string>("variant");
    if (stored != to_string(variant))
      throw Error(ErrorCode::kSceneMismatch,
                  "field 'variant' is '" + stored + "' but '" + to_string(variant) + "' was requested");
    const GridSpec grid = io::grid_from_json(r.child("grid"), variant);
    const CameraIntrinsics cam = io::camera_from_json(r.child("camera"));
    const ModelDefinition def = io::model_from_json(r.raw("model"), "model");
    const auto model = io::build_model_checked(def, "model");
    ClusterParams params = ClusterParams::for_model(*model, settings.eps_fraction);
    if (settings.eps) params.eps = *settings.eps;
    params.min_points = settings.min_points;
    params.confidence_threshold = settings.confidence_threshold;
    params.validate();
    const json& scenes = r.raw("scenes");
    if (!scenes.is_array()) r.fail("scenes", "expected an array");
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const io::Reader s(scenes[i], "scenes[" + std::to_string(i) + "]");
      const OutputTensor t = io::load_tensor(tensors_dir / s.get<std::string>("tensor"));
      if (!t.matches(grid))
        throw Error(ErrorCode::kDimensionMismatch, "tensor '" + s.get<std::string>("tensor") + "': dims " +
                                                       std::to_string(t.sx()) + "x" + std::to_string(t.sy()) + "x" +
                                                       std::to_string(t.channels()) + " do not match grid " +
                                                       grid_label(grid));
      const auto hyps = decode(t, grid, cam, *model, settings.threshold);
      out.push_back({s.get<std::string>("scene_id"), cluster(hyps, params, *model)});
    }
    meta = {{"variant", to_string(variant)},
            {"threshold", settings.threshold},
            {"cluster",
             {{"eps", params.eps}, {"min_points", params.min_points},
              {"confidence_threshold", params.confidence_threshold}}},
            {"model", model->name()}};
  } catch (const Error& e) {
    throw Error(e.code(), "manifest '" + manifest_path.string() + "': " + e.what());
  }
  io::write_file_atomic(out_path, io::predictions_to_json(out, meta).dump(2) + "\n");
  return out;
}

/// Infers the grid of a tensor from its dims and the variant.
inline GridSpec grid_for_tensor(const OutputTensor& t, Variant variant) {
  GridSpec g = GridSpec::defaults(variant);
  g.sx = t.sx();
  g.sy = t.sy();
  require(t.channels() % kFeatureSize == 0 && t.channels() > 0, ErrorCode::kDimensionMismatch,
          "tensor channels " + std::to_string(t.channels()) + " are not a positive multiple of 8");
  const std::uint32_t blocks = t.channels() / kFeatureSize;
  g.sz = 1;
  g.poses = 1;
  if (variant == Variant::kZ) g.sz = blocks;
  else if (variant == Variant::kMultiPose) g.poses = blocks;
  else
    require(blocks == 1, ErrorCode::kDimensionMismatch,
            std::string("variant '") + to_string(variant) + "' expects 8 channels, got " +
                std::to_string(t.channels()));
  return g;
}

inline LossBreakdown run_loss(const fs::path& pred_path, const fs::path& gt_path, Variant variant,
                              const LossWeights& weights, const SymmetrySpec& symmetry, const LossOptions& options,
                              std::ostream& out) {
  const OutputTensor pred = io::load_tensor(pred_path);
  const OutputTensor gt = io::load_tensor(gt_path);
  if (pred.sx() != gt.sx() || pred.sy() != gt.sy() || pred.channels() != gt.channels())
    throw Error(ErrorCode::kDimensionMismatch, "prediction and ground-truth tensors differ in dims");
  const GridSpec grid = grid_for_tensor(gt, variant);
  const LossBreakdown b = loss(pred, gt, grid, weights, symmetry, options);
  char line[128];
  const std::pair<const char*, double> rows[] = {{"presence", b.presence}, {"visibility", b.visibility},
                                                 {"position", b.position}, {"orientation", b.orientation},
                                                 {"total", b.total}};
  for (const auto& [name, value] : rows) {
    std::snprintf(line, sizeof line, "%-12s %.17g\n", name, value);
    out << line;
  }
  return b;
}

inline json to_json(const DatasetReport& r) {
  json scenes = json::array();
  for (const SceneReport& s : r.scenes)
    scenes.push_back({{"scene_id", s.scene_id}, {"model", s.model_name}, {"true_positives", s.true_positives},
                      {"false_positives", s.false_positives}, {"ignored", s.ignored},
                      {"eligible_gt", s.eligible_gt}, {"ap", s.ap}});
  json models = json::array();
  for (const ModelReport& m : r.models)
    models.push_back({{"model", m.model_name}, {"scenes", m.scenes}, {"true_positives", m.true_positives},
                      {"false_positives", m.false_positives}, {"eligible_gt", m.eligible_gt}, {"ap", m.curve.ap}});
  return {{"format", "posegrid-evaluation"}, {"version", io::kSceneVersion}, {"ap", r.pooled.ap},
          {"macro_ap", r.macro_ap}, {"models", models}, {"scenes", scenes}};
}

inline void print_table(std::ostream& out, const DatasetReport& r) {
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %7s %8s %8s %8s %9s\n", "model", "scenes", "gt", "tp", "fp", "ap");
  out << line;
  for (const ModelReport& m : r.models) {
    std::snprintf(line, sizeof line, "%-16s %7zu %8zu %8zu %8zu %9.6f\n", m.model_name.c_str(), m.scenes,
                  m.eligible_gt, m.true_positives, m.false_positives, m.curve.ap);
    out << line;
  }
  std::snprintf(line, sizeof line, "pooled ap %.6f, mean per-scene ap %.6f over %zu scenes\n", r.pooled.ap,
                r.macro_ap, r.scenes.size());
  out << line;
}

/// Every scene in the directory is evaluated; scenes without an entry in the
/// predictions file count as having no predictions.
inline DatasetReport run_evaluate(const fs::path& predictions_path, const fs::path& scenes_dir,
                                  const EvalConfig& cfg) {
  const auto predictions = io::load_predictions(predictions_path);
  std::map<std::string, const io::ScenePredictions*> by_id;
  for (const io::ScenePredictions& p : predictions)
    if (!by_id.emplace(p.scene_id, &p).second)
      throw Error(ErrorCode::kSceneMismatch, "predictions: scene '" + p.scene_id + "' appears more than once");
  std::vector<io::SceneRecord> records;
  for (const fs::path& f : io::list_scene_files(scenes_dir)) records.push_back(io::load_scene(f));
  std::vector<SceneEvaluationInput> inputs;
  std::size_t used = 0;
  for (const io::SceneRecord& s : records) {
    SceneEvaluationInput in{s.scene_id, s.model.get(), {}, s.ground_truth()};
    if (auto it = by_id.find(s.scene_id); it != by_id.end()) {
      in.predictions = it->second->predictions;
      ++used;
    }
    inputs.push_back(std::move(in));
  }
  if (used != by_id.size()) {
    for (const auto& [id, p] : by_id) {
      const bool found = std::any_of(records.begin(), records.end(), [&](const io::SceneRecord& s) {
        return s.scene_id == id;
      });
      if (!found)
        throw Error(ErrorCode::kSceneMismatch, "predictions: scene '" + id + "' has no scene file in '" +
                                                   scenes_dir.string() + "'");
    }
  }
  return evaluate_dataset(inputs, cfg);
}

// ---------------------------------------------------------------------------
// Command-line entry point
// ---------------------------------------------------------------------------

inline std::vector<Variant> parse_variant_list(const std::string& text) {
  std::vector<Variant> out;
  if (text == "all") return {kAllVariants.begin(), kAllVariants.end()};
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    out.push_back(parse_variant(text.substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

/// Runs the posegrid command line. Returns the process exit code.
inline int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"posegrid: pose grid encodings, loss, clustering and evaluation"};
  app.require_subcommand(1);
  std::string config_path;

  auto load_cfg = [&]() { return config_path.empty() ? io::ExperimentConfig{} : io::load_config(config_path); };
  const std::vector<std::string> variant_names = {"vanilla", "eve", "ap", "z", "mp", "si"};

  // default-config
  auto* c_default = app.add_subcommand("default-config", "print the configuration with every default");
  std::string default_out;
  c_default->add_option("--out", default_out, "write to this file instead of stdout");

  // generate
  auto* c_gen = app.add_subcommand("generate", "generate synthetic scenes");
  std::uint64_t seed = 0;
  std::size_t count = 1;
  std::string out_path;
  c_gen->add_option("--config", config_path, "experiment config")->check(CLI::ExistingFile);
  c_gen->add_option("--seed", seed, "first scene seed");
  c_gen->add_option("--count", count, "number of scenes");
  c_gen->add_option("--out", out_path, "output directory")->required();

  // encode
  auto* c_enc = app.add_subcommand("encode", "encode scenes into ground-truth tensors");
  std::string scenes_dir, variant_name;
  c_enc->add_option("--scenes", scenes_dir, "scene directory")->required();
  c_enc->add_option("--variant", variant_name, "parameterization")->required()->check(CLI::IsMember(variant_names));
  c_enc->add_option("--out", out_path, "output directory")->required();

  // decode
  auto* c_dec = app.add_subcommand("decode", "decode tensors and cluster the hypotheses");
  std::string tensors_dir;
  std::optional<double> threshold, eps;
  std::optional<std::size_t> min_points;
  c_dec->add_option("--tensors", tensors_dir, "tensor directory with manifest.json")->required();
  c_dec->add_option("--variant", variant_name, "parameterization")->required()->check(CLI::IsMember(variant_names));
  c_dec->add_option("--config", config_path, "experiment config")->check(CLI::ExistingFile);
  c_dec->add_option("--threshold", threshold, "presence threshold")->check(CLI::Range(0.0, 1.0));
  c_dec->add_option("--eps", eps, "clustering radius in meters")->check(CLI::PositiveNumber);
  c_dec->add_option("--min-points", min_points, "DBSCAN core size")->check(CLI::PositiveNumber);
  c_dec->add_option("--out", out_path, "predictions file")->required();

  // loss
  auto* c_loss = app.add_subcommand("loss", "loss between a predicted and a ground-truth tensor");
  std::string pred_path, gt_path, lambda3_mode, symmetry_text = "none";
  std::optional<double> lambda[4];
  bool deterministic = true, normalize = false;
  c_loss->add_option("--pred", pred_path, "predicted tensor")->required();
  c_loss->add_option("--gt", gt_path, "ground-truth tensor")->required();
  c_loss->add_option("--variant", variant_name, "parameterization")->required()->check(CLI::IsMember(variant_names));
  c_loss->add_option("--config", config_path, "experiment config")->check(CLI::ExistingFile);
  for (int n = 0; n < 4; ++n)
    c_loss->add_option("--lambda" + std::to_string(n + 1), lambda[n], "loss weight");
  c_loss->add_option("--lambda3-mode", lambda3_mode, "visibility weighting")->check(
      CLI::IsMember({"cubic", "linear"}));
  c_loss->add_option("--symmetry", symmetry_text, "none, cyclic:k or revolution");
  c_loss->add_flag("--deterministic-sum,!--parallel-sum", deterministic, "strict left-to-right summation");
  c_loss->add_flag("--normalize", normalize, "average over feature blocks instead of summing");
  c_loss->add_option("--out", out_path, "also write the breakdown as JSON");

  // evaluate
  auto* c_eval = app.add_subcommand("evaluate", "average precision of a predictions file");
  std::string predictions_path;
  std::optional<double> vis_cutoff, radius_frac;
  c_eval->add_option("--predictions", predictions_path, "predictions file")->required();
  c_eval->add_option("--scenes", scenes_dir, "scene directory")->required();
  c_eval->add_option("--config", config_path, "experiment config")->check(CLI::ExistingFile);
  c_eval->add_option("--vis-cutoff", vis_cutoff, "visibility cutoff");
  c_eval->add_option("--radius-frac", radius_frac, "match radius as a fraction of the diameter");
  c_eval->add_option("--out", out_path, "report file (JSON)");

  // roundtrip
  auto* c_rt = app.add_subcommand("roundtrip", "coverage and round-trip report per variant");
  std::string variants_text = "all";
  std::size_t rt_count = 50;
  c_rt->add_option("--config", config_path, "experiment config")->check(CLI::ExistingFile);
  c_rt->add_option("--seed", seed, "first scene seed");
  c_rt->add_option("--count", rt_count, "number of scenes");
  c_rt->add_option("--variants", variants_text, "comma-separated variants or 'all'");
  c_rt->add_option("--variant", variants_text, "single variant")->check(CLI::IsMember(variant_names));
  c_rt->add_option("--threshold", threshold, "presence threshold")->check(CLI::Range(0.0, 1.0));
  c_rt->add_option("--eps", eps, "clustering radius in meters")->check(CLI::PositiveNumber);
  c_rt->add_option("--min-points", min_points, "DBSCAN core size")->check(CLI::PositiveNumber);
  c_rt->add_option("--vis-cutoff", vis_cutoff, "visibility cutoff");
  c_rt->add_option("--radius-frac", radius_frac, "match radius as a fraction of the diameter");
  c_rt->add_option("--out", out_path, "report file (JSON)");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorCode::kInvalidArgument);
  }

  try {
    io::ExperimentConfig cfg = load_cfg();
    if (threshold) cfg.decode_threshold = *threshold;
    if (eps) cfg.eps = *eps;
    if (min_points) cfg.min_points = *min_points;
    if (vis_cutoff) cfg.eval.visibility_cutoff = *vis_cutoff;
    if (radius_frac) cfg.eval.radius_fraction = *radius_frac;
    cfg.eval.validate();

    if (*c_default) {
      const std::string text = io::to_json(cfg).dump(2) + "\n";
      if (default_out.empty()) out << text;
      else io::write_file_atomic(default_out, text);
    } else if (*c_gen) {
      const auto files = run_generate(cfg, seed, count, out_path);
      out << "wrote " << files.size() << " scenes to " << out_path << "\n";
    } else if (*c_enc) {
      run_encode(scenes_dir, parse_variant(variant_name), out_path, out);
    } else if (*c_dec) {
      DecodeSettings s;
      s.threshold = cfg.decode_threshold;
      s.eps = cfg.eps;
      s.eps_fraction = cfg.eps_fraction;
      s.min_points = cfg.min_points;
      s.confidence_threshold = cfg.confidence_threshold;
      const auto preds = run_decode(tensors_dir, parse_variant(variant_name), s, out_path);
      std::size_t total = 0;
      for (const auto& p : preds) total += p.predictions.size();
      out << "decoded " << preds.size() << " scenes, " << total << " predictions\n";
    } else if (*c_loss) {
      const Variant variant = parse_variant(variant_name);
      LossWeights w = cfg.loss;
      if (variant == Variant::kSegmentation && config_path.empty()) w.lambda3_mode = Lambda3Mode::kLinear;
      if (lambda[0]) w.lambda1 = *lambda[0];
      if (lambda[1]) w.lambda2 = *lambda[1];
      if (lambda[2]) w.lambda3_scale = *lambda[2];
      if (lambda[3]) w.lambda4 = *lambda[3];
      if (!lambda3_mode.empty()) w.lambda3_mode = parse_lambda3_mode(lambda3_mode);
      LossOptions opt;
      opt.deterministic_sum = deterministic;
      opt.normalize = normalize;
      const LossBreakdown b = run_loss(pred_path, gt_path, variant, w, parse_symmetry(symmetry_text), opt, out);
      if (!out_path.empty()) {
        const json doc = {{"presence", b.presence}, {"visibility", b.visibility}, {"position", b.position},
                          {"orientation", b.orientation}, {"total", b.total}};
        io::write_file_atomic(out_path, doc.dump(2) + "\n");
      }
    } else if (*c_eval) {
      const DatasetReport r = run_evaluate(predictions_path, scenes_dir, cfg.eval);
      print_table(out, r);
      if (!out_path.empty()) io::write_file_atomic(out_path, to_json(r).dump(2) + "\n");
    } else if (*c_rt) {
      std::vector<std::uint64_t> seeds(rt_count);
      for (std::size_t n = 0; n < rt_count; ++n) seeds[n] = seed + n;
      const RoundtripReport r = roundtrip(cfg, seeds, parse_variant_list(variants_text));
      print_table(out, r);
      if (!out_path.empty()) io::write_file_atomic(out_path, to_json(r).dump(2) + "\n");
    }
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace posegrid::cli
