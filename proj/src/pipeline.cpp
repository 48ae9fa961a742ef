#include "hybridloc/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hybridloc/io.hpp"
#include "hybridloc/plot.hpp"
#include "hybridloc/rng.hpp"

namespace hybridloc {

namespace {

using nlohmann::json;

constexpr const char* kToolVersion = "hybridloc 1.0.0";

// ---- logging ---------------------------------------------------------------

int log_level() {  // 0 quiet, 1 info, 2 debug
  static const int level = [] {
    const char* env = std::getenv("HYBRIDLOC_LOG");
    if (!env) return 1;
    const std::string v(env);
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[hybridloc] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[hybridloc:debug] " << msg << "\n";
}

// ---- config ----------------------------------------------------------------

json intrinsics_to_json(const Intrinsics& k) {
  return json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx},
              {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

Intrinsics intrinsics_from_json(const json& j, const Intrinsics& base) {
  Intrinsics k = base;
  k.fx = j.value("fx", k.fx);
  k.fy = j.value("fy", k.fy);
  k.cx = j.value("cx", k.cx);
  k.cy = j.value("cy", k.cy);
  k.width = j.value("width", k.width);
  k.height = j.value("height", k.height);
  return k;
}

json config_to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["ablation"] = std::string(to_string(c.ablation));
  j["paths"] = {{"out_dir", c.paths.out_dir},       {"scene", c.paths.scene},
                {"tracks", c.paths.tracks},         {"matches", c.paths.matches},
                {"detections", c.paths.detections}, {"queries_gt", c.paths.queries_gt}};
  j["scene"] = {{"num_points", c.scene.num_points},
                {"num_frames", c.scene.num_frames},
                {"num_queries", c.scene.num_queries},
                {"num_scan_keypoints", c.scene.num_scan_keypoints},
                {"point_extent", c.scene.point_extent},
                {"ring_radius", c.scene.ring_radius},
                {"ring_height", c.scene.ring_height},
                {"arc_degrees", c.scene.arc_degrees},
                {"waypoints", c.scene.waypoints},
                {"intrinsics", intrinsics_to_json(c.scene.intrinsics)}};
  if (c.scene.dropped_segment) {
    j["scene"]["dropped_segment"] = {c.scene.dropped_segment->first,
                                     c.scene.dropped_segment->second};
  }
  j["noise"] = {{"pixel_sigma", c.noise.pixel_sigma},
                {"outlier_rate", c.noise.outlier_rate},
                {"depth_sigma", c.noise.depth_sigma},
                {"dropout_rate", c.noise.dropout_rate}};
  j["ransac"] = {{"max_iterations", c.ransac.max_iterations},
                 {"inlier_threshold_px", c.ransac.inlier_threshold_px},
                 {"min_inliers", c.ransac.min_inliers},
                 {"confidence", c.ransac.confidence}};
  j["sfm"] = {{"ransac",
               {{"max_iterations", c.sfm.ransac.max_iterations},
                {"inlier_threshold_px", c.sfm.ransac.inlier_threshold_px},
                {"min_inliers", c.sfm.ransac.min_inliers},
                {"confidence", c.sfm.ransac.confidence}}},
              {"ba",
               {{"max_iterations", c.sfm.ba.max_iterations},
                {"initial_lambda", c.sfm.ba.initial_lambda},
                {"lambda_up", c.sfm.ba.lambda_up},
                {"lambda_down", c.sfm.ba.lambda_down},
                {"relative_decrease_tol", c.sfm.ba.relative_decrease_tol},
                {"huber_delta_px", c.sfm.ba.huber_delta_px}}},
              {"triangulation_max_reproj_px", c.sfm.triangulation_max_reproj_px},
              {"min_shared_for_bootstrap", c.sfm.min_shared_for_bootstrap}};
  j["union"] = {{"preference", std::string(to_string(c.policy.preference))}};
  if (c.policy.consistency_gate_m) {
    j["union"]["consistency_gate_m"] = *c.policy.consistency_gate_m;
  }
  j["thresholds"] = {{"tau_l2_m", c.thresholds.tau_l2_m},
                     {"tau_angle_rad", c.thresholds.tau_angle_rad}};
  j["predict"] = {{"peak_min_prominence", c.predict.peak_min_prominence}};
  return j;
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c = PipelineConfig{};
  c.seed = j.value("seed", c.seed);
  if (j.contains("ablation")) {
    const auto a = ablation_from_string(j.at("ablation").get<std::string>());
    if (!a) throw std::invalid_argument("config: unknown ablation");
    c.ablation = *a;
  }
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    c.paths.out_dir = p.value("out_dir", c.paths.out_dir);
    c.paths.scene = p.value("scene", c.paths.scene);
    c.paths.tracks = p.value("tracks", c.paths.tracks);
    c.paths.matches = p.value("matches", c.paths.matches);
    c.paths.detections = p.value("detections", c.paths.detections);
    c.paths.queries_gt = p.value("queries_gt", c.paths.queries_gt);
  }
  if (j.contains("scene")) {
    const json& s = j.at("scene");
    c.scene.num_points = s.value("num_points", c.scene.num_points);
    c.scene.num_frames = s.value("num_frames", c.scene.num_frames);
    c.scene.num_queries = s.value("num_queries", c.scene.num_queries);
    c.scene.num_scan_keypoints = s.value("num_scan_keypoints", c.scene.num_scan_keypoints);
    c.scene.point_extent = s.value("point_extent", c.scene.point_extent);
    c.scene.ring_radius = s.value("ring_radius", c.scene.ring_radius);
    c.scene.ring_height = s.value("ring_height", c.scene.ring_height);
    c.scene.arc_degrees = s.value("arc_degrees", c.scene.arc_degrees);
    c.scene.waypoints = s.value("waypoints", c.scene.waypoints);
    if (s.contains("intrinsics")) {
      c.scene.intrinsics = intrinsics_from_json(s.at("intrinsics"), c.scene.intrinsics);
    }
    if (s.contains("dropped_segment") && !s.at("dropped_segment").is_null()) {
      const auto seg = s.at("dropped_segment");
      c.scene.dropped_segment = {{seg.at(0).get<int>(), seg.at(1).get<int>()}};
    }
  }
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    c.noise.pixel_sigma = n.value("pixel_sigma", c.noise.pixel_sigma);
    c.noise.outlier_rate = n.value("outlier_rate", c.noise.outlier_rate);
    c.noise.depth_sigma = n.value("depth_sigma", c.noise.depth_sigma);
    c.noise.dropout_rate = n.value("dropout_rate", c.noise.dropout_rate);
  }
  const auto ransac_from = [](const json& r, RansacParams base) {
    base.max_iterations = r.value("max_iterations", base.max_iterations);
    base.inlier_threshold_px = r.value("inlier_threshold_px", base.inlier_threshold_px);
    base.min_inliers = r.value("min_inliers", base.min_inliers);
    base.confidence = r.value("confidence", base.confidence);
    return base;
  };
  if (j.contains("ransac")) c.ransac = ransac_from(j.at("ransac"), c.ransac);
  if (j.contains("sfm")) {
    const json& s = j.at("sfm");
    if (s.contains("ransac")) c.sfm.ransac = ransac_from(s.at("ransac"), c.sfm.ransac);
    if (s.contains("ba")) {
      const json& b = s.at("ba");
      c.sfm.ba.max_iterations = b.value("max_iterations", c.sfm.ba.max_iterations);
      c.sfm.ba.initial_lambda = b.value("initial_lambda", c.sfm.ba.initial_lambda);
      c.sfm.ba.lambda_up = b.value("lambda_up", c.sfm.ba.lambda_up);
      c.sfm.ba.lambda_down = b.value("lambda_down", c.sfm.ba.lambda_down);
      c.sfm.ba.relative_decrease_tol =
          b.value("relative_decrease_tol", c.sfm.ba.relative_decrease_tol);
      c.sfm.ba.huber_delta_px = b.value("huber_delta_px", c.sfm.ba.huber_delta_px);
    }
    c.sfm.triangulation_max_reproj_px =
        s.value("triangulation_max_reproj_px", c.sfm.triangulation_max_reproj_px);
    c.sfm.min_shared_for_bootstrap =
        s.value("min_shared_for_bootstrap", c.sfm.min_shared_for_bootstrap);
  }
  if (j.contains("union")) {
    const json& u = j.at("union");
    const std::string pref = u.value("preference", std::string("prefer-sfm"));
    if (pref == "prefer-sfm") {
      c.policy.preference = UnionPreference::PreferSfm;
    } else if (pref == "prefer-pnp") {
      c.policy.preference = UnionPreference::PreferPnp;
    } else {
      throw std::invalid_argument("config: unknown union preference '" + pref + "'");
    }
    if (u.contains("consistency_gate_m") && !u.at("consistency_gate_m").is_null()) {
      c.policy.consistency_gate_m = u.at("consistency_gate_m").get<double>();
    }
  }
  if (j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    c.thresholds.tau_l2_m = t.value("tau_l2_m", c.thresholds.tau_l2_m);
    c.thresholds.tau_angle_rad = t.value("tau_angle_rad", c.thresholds.tau_angle_rad);
  }
  if (j.contains("predict")) {
    c.predict.peak_min_prominence =
        j.at("predict").value("peak_min_prominence", c.predict.peak_min_prominence);
  }
  return c;
}

// ---- manifest --------------------------------------------------------------

std::filesystem::path manifest_path(const PipelineConfig& c) {
  return c.paths.out("manifest.json");
}

class StageScope {
 public:
  StageScope(const PipelineConfig& config, std::string stage)
      : config_(config), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(config.paths.out_dir);
    log_info("stage " + stage_ + " started");
  }

  void artifact(const std::filesystem::path& p) { artifacts_.push_back(p.filename().string()); }

  void coverage(const std::string& source, std::size_t count) {
    coverage_.emplace_back(source, count);
  }

  // Writes the updated manifest; called once on success.
  void finish() {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m;
    {
      std::ifstream in(manifest_path(config_));
      if (in) {
        try {
          m = json::parse(in);
        } catch (const json::parse_error&) {
          m = json::object();
        }
      }
    }
    m["tool_version"] = kToolVersion;
    m["config"] = config_to_json(config_);
    m["stages"][stage_]["seconds"] = seconds;
    for (const std::string& a : artifacts_) {
      auto& list = m["artifacts"];
      if (!list.is_array()) list = json::array();
      bool present = false;
      for (const auto& existing : list) {
        if (existing == a) present = true;
      }
      if (!present) list.push_back(a);
    }
    for (const auto& [source, count] : coverage_) {
      m["coverage"][source] = count;
    }
    std::ofstream out(manifest_path(config_));
    if (!out) throw IoError("cannot write manifest: " + manifest_path(config_).string());
    out << m.dump(2) << "\n";
    log_info("stage " + stage_ + " finished in " + std::to_string(seconds) + " s");
  }

 private:
  const PipelineConfig& config_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> artifacts_;
  std::vector<std::pair<std::string, std::size_t>> coverage_;
};

void require_artifact(const std::filesystem::path& p, const std::string& producer) {
  if (!std::filesystem::exists(p)) {
    throw StageDependencyError("missing upstream artifact " + p.string() + " (run '" +
                               producer + "' first)");
  }
}

const char* predictions_name(Ablation a) {
  switch (a) {
    case Ablation::Hybrid: return "predictions.txt";
    case Ablation::SfmOnly: return "predictions_sfm_only.txt";
    case Ablation::PnpOnly: return "predictions_pnp_only.txt";
  }
  return "predictions.txt";
}

const char* metrics_name(Ablation a) {
  switch (a) {
    case Ablation::Hybrid: return "metrics.txt";
    case Ablation::SfmOnly: return "metrics_sfm_only.txt";
    case Ablation::PnpOnly: return "metrics_pnp_only.txt";
  }
  return "metrics.txt";
}

const char* metrics_table_name(Ablation a) {
  switch (a) {
    case Ablation::Hybrid: return "metrics_table.txt";
    case Ablation::SfmOnly: return "metrics_table_sfm_only.txt";
    case Ablation::PnpOnly: return "metrics_table_pnp_only.txt";
  }
  return "metrics_table.txt";
}

std::filesystem::path pose_table_for(const PipelineConfig& c, Ablation a) {
  switch (a) {
    case Ablation::Hybrid: return c.paths.out("poses_hybrid.txt");
    case Ablation::SfmOnly: return c.paths.out("poses_sfm_aligned.txt");
    case Ablation::PnpOnly: return c.paths.out("poses_pnp.txt");
  }
  return c.paths.out("poses_hybrid.txt");
}

}  // namespace

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::Hybrid: return "hybrid";
    case Ablation::SfmOnly: return "sfm-only";
    case Ablation::PnpOnly: return "pnp-only";
  }
  return "hybrid";
}

std::optional<Ablation> ablation_from_string(std::string_view s) {
  if (s == "hybrid") return Ablation::Hybrid;
  if (s == "sfm-only") return Ablation::SfmOnly;
  if (s == "pnp-only") return Ablation::PnpOnly;
  return std::nullopt;
}

std::filesystem::path PipelinePaths::resolve(const std::string& explicit_path,
                                             const char* standard_name) const {
  if (!explicit_path.empty()) return explicit_path;
  return std::filesystem::path(out_dir) / standard_name;
}

PipelineConfig default_config() { return PipelineConfig{}; }

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string config_to_json_string(const PipelineConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

void cmd_synth(const PipelineConfig& config) {
  StageScope stage(config, "synth");

  const SceneTruth scene = generate_scene(config.scene, derive_seed(config.seed, "scene"));
  NoiseSpec noise = config.noise;
  noise.seed = derive_seed(config.seed, "noise");
  const TrackSet tracks = render_tracks(scene, noise);
  const std::vector<Detection> detections = make_detections(scene, noise);

  std::map<int, Vec3> keypoints;
  for (int id : scene.scan_keypoint_ids) keypoints.emplace(id, scene.world_points.at(id));

  std::vector<QueryGroundTruth> queries;
  for (const SceneQuery& q : scene.queries) {
    queries.push_back({q.query_id, q.query_frame, q.object,
                       scene.trajectory[q.query_frame].translation});
  }

  io::write_scene(config.paths.scene_path(), scene);
  io::write_tracks(config.paths.tracks_path(), tracks.observations, scene.intrinsics);
  io::write_matches(config.paths.matches_path(), tracks.matches, keypoints, scene.intrinsics);
  io::write_detections(config.paths.detections_path(), detections, scene.intrinsics);
  io::write_queries(config.paths.queries_path(), queries);

  stage.artifact(config.paths.scene_path());
  stage.artifact(config.paths.tracks_path());
  stage.artifact(config.paths.matches_path());
  stage.artifact(config.paths.detections_path());
  stage.artifact(config.paths.queries_path());
  log_debug("synth: " + std::to_string(tracks.observations.size()) + " observations, " +
            std::to_string(tracks.matches.size()) + " matches, " +
            std::to_string(detections.size()) + " detections");
  stage.finish();
}

void cmd_sfm(const PipelineConfig& config) {
  StageScope stage(config, "sfm");
  require_artifact(config.paths.tracks_path(), "synth");

  const auto [tracks, k] = io::read_tracks(config.paths.tracks_path());
  SfmParams params = config.sfm;
  params.ransac.seed = derive_seed(config.seed, "sfm");
  const ReconstructionMap map =
      run_incremental_sfm(observations_from_tracks(tracks), k, params);

  io::write_poses(config.paths.out("poses_sfm.txt"), map.poses);
  io::write_landmarks(config.paths.out("landmarks.txt"), map.landmarks);
  stage.artifact(config.paths.out("poses_sfm.txt"));
  stage.artifact(config.paths.out("landmarks.txt"));
  stage.coverage("sfm", map.poses.size());
  stage.finish();
}

void cmd_reloc(const PipelineConfig& config) {
  StageScope stage(config, "reloc");
  require_artifact(config.paths.matches_path(), "synth");

  const io::MatchFile file = io::read_matches(config.paths.matches_path());
  const auto by_frame = correspondences_from_matches(file.matches, file.keypoints);
  RansacParams params = config.ransac;
  params.seed = derive_seed(config.seed, "reloc");
  const PoseTable table = relocalize_frames(by_frame, file.intrinsics, params);

  io::write_poses(config.paths.out("poses_pnp.txt"), table);
  stage.artifact(config.paths.out("poses_pnp.txt"));
  stage.coverage("pnp", table.size());
  stage.finish();
}

void cmd_fuse(const PipelineConfig& config) {
  StageScope stage(config, "fuse");
  require_artifact(config.paths.out("poses_sfm.txt"), "sfm");
  require_artifact(config.paths.out("poses_pnp.txt"), "reloc");

  const PoseTable sfm = io::read_poses(config.paths.out("poses_sfm.txt"));
  const PoseTable pnp = io::read_poses(config.paths.out("poses_pnp.txt"));

  const auto [aligned, report] = align_sfm_to_scan(sfm, pnp);
  const PoseTable hybrid = union_poses(aligned, pnp, config.policy);

  io::write_poses(config.paths.out("poses_sfm_aligned.txt"), aligned);
  io::write_poses(config.paths.out("poses_hybrid.txt"), hybrid);
  io::write_alignment(config.paths.out("alignment.txt"), report);
  stage.artifact(config.paths.out("poses_sfm_aligned.txt"));
  stage.artifact(config.paths.out("poses_hybrid.txt"));
  stage.artifact(config.paths.out("alignment.txt"));
  stage.coverage("hybrid", hybrid.size());
  log_debug("fuse: rms center residual " + io::format_double(report.rms_center_residual));
  stage.finish();
}

void cmd_predict(const PipelineConfig& config) {
  StageScope stage(config, "predict");
  require_artifact(config.paths.detections_path(), "synth");
  require_artifact(config.paths.queries_path(), "synth");
  const auto pose_path = pose_table_for(config, config.ablation);
  require_artifact(pose_path, config.ablation == Ablation::PnpOnly ? "reloc" : "fuse");

  const auto [detections, k] = io::read_detections(config.paths.detections_path());
  const auto queries = io::read_queries(config.paths.queries_path());
  const PoseTable poses = io::read_poses(pose_path);

  std::map<int, std::vector<Detection>> by_query;
  for (const Detection& d : detections) by_query[d.query_id].push_back(d);

  std::vector<Prediction> predictions;
  for (const QueryGroundTruth& q : queries) {
    const auto it = by_query.find(q.query_id);
    Prediction p;
    if (it == by_query.end()) {
      p.query_id = q.query_id;
      p.status = poses.count(q.query_frame) ? PredictionStatus::NoDetection
                                            : PredictionStatus::NoPose;
    } else {
      p = predict_query(it->second, poses, k, q.query_frame, config.predict);
      p.query_id = q.query_id;
    }
    predictions.push_back(p);
  }

  io::write_predictions(config.paths.out(predictions_name(config.ablation)), predictions);
  stage.artifact(config.paths.out(predictions_name(config.ablation)));
  stage.finish();
}

void cmd_eval(const PipelineConfig& config) {
  StageScope stage(config, "eval");
  const auto pred_path = config.paths.out(predictions_name(config.ablation));
  require_artifact(pred_path, "predict");
  require_artifact(config.paths.queries_path(), "synth");

  const auto predictions = io::read_predictions(pred_path);
  const auto queries = io::read_queries(config.paths.queries_path());

  std::map<int, Prediction> by_id;
  for (const Prediction& p : predictions) by_id[p.query_id] = p;

  std::vector<QueryRecord> records;
  for (const QueryGroundTruth& q : queries) {
    const auto it = by_id.find(q.query_id);
    if (it == by_id.end()) {
      throw StageDependencyError("prediction missing for query " + std::to_string(q.query_id) +
                                 " in " + pred_path.string());
    }
    records.push_back(evaluate_query(it->second, q, config.thresholds));
  }
  const MetricsReport report = aggregate_metrics(records);

  io::write_metrics(config.paths.out(metrics_name(config.ablation)), report);
  const std::vector<std::pair<std::string, MetricsReport>> rows{
      {std::string(to_string(config.ablation)), report}};
  io::write_text(config.paths.out(metrics_table_name(config.ablation)),
                 format_metrics_table(rows));
  stage.artifact(config.paths.out(metrics_name(config.ablation)));
  stage.artifact(config.paths.out(metrics_table_name(config.ablation)));
  stage.finish();
}

void cmd_run_all(const PipelineConfig& config) {
  cmd_synth(config);
  cmd_sfm(config);
  cmd_reloc(config);
  cmd_fuse(config);

  PipelineConfig hybrid = config;
  hybrid.ablation = Ablation::Hybrid;
  cmd_predict(hybrid);
  cmd_eval(hybrid);

  PipelineConfig sfm_only = config;
  sfm_only.ablation = Ablation::SfmOnly;
  cmd_predict(sfm_only);
  cmd_eval(sfm_only);

  StageScope stage(config, "run-all");
  const MetricsReport hybrid_report = io::read_metrics(config.paths.out("metrics.txt"));
  const MetricsReport sfm_report = io::read_metrics(config.paths.out("metrics_sfm_only.txt"));
  const std::vector<std::pair<std::string, MetricsReport>> rows{
      {"hybrid", hybrid_report}, {"sfm-only", sfm_report}};
  io::write_text(config.paths.out("comparison_table.txt"), format_metrics_table(rows));
  stage.artifact(config.paths.out("comparison_table.txt"));
  stage.finish();
}

void cmd_plot(const PipelineConfig& config) {
  StageScope stage(config, "plot");
  require_artifact(config.paths.out("poses_sfm_aligned.txt"), "fuse");
  require_artifact(config.paths.out("poses_pnp.txt"), "reloc");
  require_artifact(config.paths.out("poses_hybrid.txt"), "fuse");

  const PoseTable sfm = io::read_poses(config.paths.out("poses_sfm_aligned.txt"));
  const PoseTable pnp = io::read_poses(config.paths.out("poses_pnp.txt"));
  const PoseTable hybrid = io::read_poses(config.paths.out("poses_hybrid.txt"));

  PlotInputs inputs;
  inputs.sfm_aligned = &sfm;
  inputs.pnp = &pnp;
  inputs.hybrid = &hybrid;

  SceneTruth scene;
  if (std::filesystem::exists(config.paths.scene_path())) {
    scene = io::read_scene(config.paths.scene_path());
    inputs.gt_trajectory = &scene.trajectory;
  }
  std::vector<QueryGroundTruth> queries;
  if (std::filesystem::exists(config.paths.queries_path())) {
    queries = io::read_queries(config.paths.queries_path());
    inputs.queries = &queries;
  }
  std::vector<Prediction> predictions;
  if (std::filesystem::exists(config.paths.out(predictions_name(config.ablation)))) {
    predictions = io::read_predictions(config.paths.out(predictions_name(config.ablation)));
    inputs.predictions = &predictions;
  }

  io::write_text(config.paths.out("trajectory.svg"), render_trajectory_svg(inputs));
  stage.artifact(config.paths.out("trajectory.svg"));
  stage.finish();
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"hybrid SfM + relocalization pipeline for egocentric 3D object queries"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override;
  std::optional<std::string> policy_override;
  std::optional<std::string> ablation_override;

  app.add_option("--config", config_path, "JSON pipeline configuration");
  app.add_option("--seed", seed_override, "global seed override");
  app.add_option("--out", out_override, "output directory override");
  app.add_option("--policy", policy_override, "union preference: prefer-sfm | prefer-pnp")
      ->check(CLI::IsMember({"prefer-sfm", "prefer-pnp"}));
  app.add_option("--ablation", ablation_override,
                 "pose table for predict/eval: hybrid | sfm-only | pnp-only")
      ->check(CLI::IsMember({"hybrid", "sfm-only", "pnp-only"}));

  struct Stage {
    std::string name;
    const char* help;
    void (*fn)(const PipelineConfig&);
  };
  const std::vector<Stage> stages{
      {"synth", "generate the synthetic world and all stage inputs", cmd_synth},
      {"sfm", "incremental structure from motion over the tracks", cmd_sfm},
      {"reloc", "per-frame PnP relocalization from 2D-3D matches", cmd_reloc},
      {"fuse", "align SfM to the scan frame and union the pose sets", cmd_fuse},
      {"predict", "lift detections into per-query 3D predictions", cmd_predict},
      {"eval", "compute Succ / Succ* / L2 / Angle / QwP", cmd_eval},
      {"run-all", "full pipeline plus the SfM-only ablation comparison", cmd_run_all},
      {"plot", "top-down SVG of trajectories and objects", cmd_plot}};
  for (const Stage& s : stages) {
    app.add_subcommand(s.name, s.help)->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    PipelineConfig config =
        config_path.empty() ? default_config() : load_config(config_path);
    if (seed_override) config.seed = *seed_override;
    if (out_override) config.paths.out_dir = *out_override;
    if (policy_override) {
      config.policy.preference = (*policy_override == "prefer-pnp")
                                     ? UnionPreference::PreferPnp
                                     : UnionPreference::PreferSfm;
    }
    if (ablation_override) config.ablation = *ablation_from_string(*ablation_override);

    for (const Stage& s : stages) {
      if (app.got_subcommand(s.name)) {
        s.fn(config);
        return 0;
      }
    }
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hybridloc
