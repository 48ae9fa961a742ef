// Acceptance suite: runs every top-level criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybridloc/evalkit.hpp"
#include "hybridloc/fuse.hpp"
#include "hybridloc/io.hpp"
#include "hybridloc/minisfm.hpp"
#include "hybridloc/pipeline.hpp"
#include "hybridloc/pnp.hpp"
#include "hybridloc/reprojection.hpp"
#include "hybridloc/rng.hpp"
#include "hybridloc/synthworld.hpp"
#include "test_util.hpp"

using namespace hybridloc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += why;
    }
  }
  void note(const std::string& info) {
    if (!detail.empty()) detail += "; ";
    detail += info;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hybridloc_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

PipelineConfig scenario_config(const fs::path& out, std::uint64_t seed, bool dropped_segment) {
  PipelineConfig c;
  c.paths.out_dir = out.string();
  c.seed = seed;
  if (dropped_segment) c.scene.dropped_segment = {{8, 12}};
  return c;
}

// ---- criterion 1: zero-noise end-to-end -------------------------------------

Outcome criterion_zero_noise_end_to_end() {
  Outcome out;
  const fs::path dir = fresh_dir("c1");
  const auto start = std::chrono::steady_clock::now();
  cmd_run_all(scenario_config(dir, 1001, false));
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const MetricsReport m = io::read_metrics(dir / "metrics.txt");
  out.require(m.succ_pct == 100.0, "Succ=" + fmt(m.succ_pct) + " != 100");
  out.require(m.qwp_pct == 100.0, "QwP=" + fmt(m.qwp_pct) + " != 100");
  out.require(m.mean_l2_m < 1e-6, "mean L2=" + fmt(m.mean_l2_m) + " >= 1e-6 m");
  out.require(m.mean_angle_rad < 1e-6, "mean angle=" + fmt(m.mean_angle_rad) + " >= 1e-6 rad");
  out.require(seconds < 60.0, "runtime " + fmt(seconds) + " s >= 60 s");
  out.note("Succ=" + fmt(m.succ_pct) + "%, QwP=" + fmt(m.qwp_pct) + "%, L2=" +
           fmt(m.mean_l2_m) + " m, angle=" + fmt(m.mean_angle_rad) + " rad, " + fmt(seconds) +
           " s");
  return out;
}

// ---- criterion 2: hybrid-vs-SfM-only ablation --------------------------------

Outcome criterion_hybrid_ablation() {
  Outcome out;
  const fs::path dir = fresh_dir("c2");
  cmd_run_all(scenario_config(dir, 1002, true));

  const MetricsReport hybrid = io::read_metrics(dir / "metrics.txt");
  const MetricsReport sfm_only = io::read_metrics(dir / "metrics_sfm_only.txt");
  const auto queries = io::read_queries(dir / "queries_gt.txt");

  int in_segment = 0;
  for (const auto& q : queries) {
    if (q.query_frame >= 8 && q.query_frame <= 12) ++in_segment;
  }
  const double fraction_pct = 100.0 * double(in_segment) / double(queries.size());
  out.require(in_segment > 0, "scenario has no query frame inside the dropped segment");

  const double qwp_gain = hybrid.qwp_pct - sfm_only.qwp_pct;
  out.require(qwp_gain >= fraction_pct - 1e-9,
              "QwP gain " + fmt(qwp_gain) + " < dropped-query fraction " + fmt(fraction_pct));
  out.require(hybrid.succ_pct > sfm_only.succ_pct,
              "Succ(hybrid)=" + fmt(hybrid.succ_pct) + " not strictly above Succ(sfm-only)=" +
                  fmt(sfm_only.succ_pct));
  out.note("QwP " + fmt(sfm_only.qwp_pct) + "% -> " + fmt(hybrid.qwp_pct) + "%, Succ " +
           fmt(sfm_only.succ_pct) + "% -> " + fmt(hybrid.succ_pct) + "%, dropped fraction " +
           fmt(fraction_pct) + "%");
  return out;
}

// ---- criterion 3: metric identity --------------------------------------------

Outcome criterion_metric_identity() {
  Outcome out;

  // Every report this suite produced plus a randomized batch.
  for (const char* run : {"c1", "c2"}) {
    for (const char* name : {"metrics.txt", "metrics_sfm_only.txt"}) {
      const fs::path path = fs::temp_directory_path() / "hybridloc_acceptance" / run / name;
      if (!fs::exists(path)) continue;
      const MetricsReport m = io::read_metrics(path);
      out.require(m.succ_pct == m.succ_star_pct * m.qwp_pct / 100.0,
                  std::string("identity broken in ") + run + "/" + name);
    }
  }

  Rng rng(1003);
  for (int trial = 0; trial < 200; ++trial) {
    const int total = rng.uniform_int(1, 40);
    std::vector<QueryRecord> records(total);
    for (int i = 0; i < total; ++i) {
      records[i].query_id = i;
      records[i].has_pose = rng.bernoulli(0.7);
      records[i].has_prediction = records[i].has_pose && rng.bernoulli(0.8);
      if (records[i].has_prediction) {
        records[i].l2_error_m = rng.uniform(0.0, 10.0);
        records[i].angle_error_rad = rng.uniform(0.0, 3.0);
        records[i].success = rng.bernoulli(0.5);
      }
    }
    const MetricsReport m = aggregate_metrics(records);
    out.require(m.succ_pct == m.succ_star_pct * m.qwp_pct / 100.0,
                "identity broken on randomized records");
  }

  // Published leaderboard row, rounded to two digits, re-checked at 0.2pp.
  const double recomputed = 96.15 * 92.05 / 100.0;
  out.require(std::abs(recomputed - 88.64) <= 0.2,
              "reference row deviates by " + fmt(std::abs(recomputed - 88.64)));
  out.note("reference row residual " + fmt(std::abs(recomputed - 88.64)) + "pp");
  return out;
}

// ---- criterion 4: PnP robustness ---------------------------------------------

Outcome criterion_pnp_robustness() {
  Outcome out;
  const Intrinsics k{500.0, 500.0, 320.0, 240.0, 640, 480};
  const double sigma = 1.0;

  int center_ok = 0;
  int returned = 0;
  double worst_rotation = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(derive_seed(1004, std::uint64_t(trial)));

    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Pose pose;
    const Vec3 eye(6.0 * std::cos(theta), 6.0 * std::sin(theta), rng.uniform(1.0, 2.0));
    const Vec3 forward = (Vec3::Zero() - eye).normalized();
    const Vec3 right = forward.cross(Vec3::UnitZ()).normalized();
    pose.rotation.col(0) = right;
    pose.rotation.col(1) = forward.cross(right);
    pose.rotation.col(2) = forward;
    pose.translation = eye;

    std::vector<Correspondence2D3D> corrs;
    double depth_sum = 0.0;
    while (int(corrs.size()) < 100) {
      const Vec3 p(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
      const auto proj = project(p, pose, k);
      if (!proj || !in_image(proj->pixel, k)) continue;
      corrs.push_back({proj->pixel + Pixel(rng.gaussian(sigma), rng.gaussian(sigma)), p,
                       int(corrs.size())});
      depth_sum += proj->depth;
    }
    const double mean_depth = depth_sum / 100.0;
    for (int i = 0; i < 30; ++i) {  // 30% wrong associations
      int other = rng.uniform_int(0, 98);
      if (other >= i) ++other;
      corrs[i].point = corrs[other].point;
    }

    RansacParams params;
    params.seed = derive_seed(2004, std::uint64_t(trial));
    const auto result = ransac_pnp(corrs, k, params);
    if (!result) continue;
    ++returned;

    const double rot_err = rotation_angle(result->pose.rotation, pose.rotation);
    worst_rotation = std::max(worst_rotation, rot_err);
    const double center_err = (result->pose.translation - pose.translation).norm();
    if (center_err < 5.0 * sigma * mean_depth / k.fx) ++center_ok;
  }

  out.require(returned == 100, "only " + std::to_string(returned) + "/100 trials returned");
  out.require(center_ok >= 95,
              "center bound met on " + std::to_string(center_ok) + "/100 trials (need 95)");
  out.require(worst_rotation < 0.01,
              "worst rotation error " + fmt(worst_rotation) + " rad >= 0.01");
  out.note(std::to_string(center_ok) + "/100 within center bound, worst rotation " +
           fmt(worst_rotation) + " rad");
  return out;
}

// ---- criterion 5: SfM accuracy ------------------------------------------------

double aligned_rms(const ReconstructionMap& map, const SceneTruth& scene) {
  std::vector<Vec3> src, dst;
  for (const auto& [frame, entry] : map.poses) {
    src.push_back(entry.pose.translation);
    dst.push_back(scene.trajectory[frame].translation);
  }
  const Sim3 align = umeyama_sim3(src, dst);
  double sq = 0.0;
  for (size_t i = 0; i < src.size(); ++i) sq += (align.apply(src[i]) - dst[i]).squaredNorm();
  return std::sqrt(sq / double(src.size()));
}

Outcome criterion_sfm_accuracy() {
  Outcome out;

  {
    const SceneTruth scene = generate_scene(SceneConfig{}, 1005);
    const TrackSet tracks = render_tracks(scene, NoiseSpec{});
    SfmParams params;
    params.ransac.seed = 1005;
    const ReconstructionMap map =
        run_incremental_sfm(observations_from_tracks(tracks.observations), scene.intrinsics,
                            params);
    out.require(map.poses.size() == scene.trajectory.size(),
                "zero-noise run registered " + std::to_string(map.poses.size()) + "/20 frames");
    const double rms = aligned_rms(map, scene);
    out.require(rms < 1e-6, "zero-noise aligned RMS " + fmt(rms) + " >= 1e-6 m");
    out.note("zero-noise RMS " + fmt(rms) + " m");
  }

  double worst_relative = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SceneTruth scene = generate_scene(SceneConfig{}, 2000 + seed);
    NoiseSpec noise;
    noise.pixel_sigma = 1.0;
    noise.seed = 3000 + seed;
    const TrackSet tracks = render_tracks(scene, noise);
    SfmParams params;
    params.ransac.seed = 4000 + seed;
    const ReconstructionMap map =
        run_incremental_sfm(observations_from_tracks(tracks.observations), scene.intrinsics,
                            params);
    out.require(map.poses.size() >= 3, "noisy run registered too few frames");
    const double relative = aligned_rms(map, scene) / mean_scene_depth(scene);
    worst_relative = std::max(worst_relative, relative);
  }
  out.require(worst_relative < 0.05,
              "noisy aligned RMS reaches " + fmt(100.0 * worst_relative) + "% of scene depth");
  out.note("worst noisy RMS " + fmt(100.0 * worst_relative) + "% of scene depth over 10 seeds");
  return out;
}

// ---- criterion 6: optimizer checks ---------------------------------------------

Outcome criterion_optimizer_checks() {
  Outcome out;
  const Intrinsics k{500.0, 500.0, 320.0, 240.0, 640, 480};

  // Analytic Jacobians of the bundle residual vs central differences.
  Rng rng(1006);
  const double h = 1e-6;
  double worst = 0.0;
  int tested = 0;
  while (tested < 200) {
    CameraParam cam;
    cam.rotation = testutil::random_rotation(rng);
    cam.translation = testutil::random_vec3(rng, 2.0);
    const Vec3 point = testutil::random_vec3(rng, 4.0);
    const Pixel observed(rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0));
    const ReprojResidual res = reprojection_residual(cam, point, observed, k);
    if (!res.valid || res.depth < 0.5) continue;
    ++tested;

    Mat26 num_cam;
    bool usable = true;
    for (int p = 0; p < 6; ++p) {
      Vec6 d = Vec6::Zero();
      d(p) = h;
      const auto plus = reprojection_residual(cam.updated(d), point, observed, k);
      d(p) = -h;
      const auto minus = reprojection_residual(cam.updated(d), point, observed, k);
      if (!plus.valid || !minus.valid) {
        usable = false;
        break;
      }
      num_cam.col(p) = (plus.r - minus.r) / (2.0 * h);
    }
    if (!usable) {
      --tested;
      continue;
    }
    Mat23 num_point;
    for (int p = 0; p < 3; ++p) {
      Vec3 d = Vec3::Zero();
      d(p) = h;
      num_point.col(p) = (reprojection_residual(cam, point + d, observed, k).r -
                          reprojection_residual(cam, point - d, observed, k).r) /
                         (2.0 * h);
    }
    worst = std::max(worst, (num_cam - res.j_camera).norm() / (1.0 + res.j_camera.norm()));
    worst = std::max(worst, (num_point - res.j_point).norm() / (1.0 + res.j_point.norm()));
  }
  out.require(worst <= 1e-5, "Jacobian relative deviation " + fmt(worst) + " > 1e-5");
  out.note("worst Jacobian deviation " + fmt(worst));

  // Accepted BA costs strictly decrease on a perturbed problem.
  const SceneTruth scene = generate_scene(SceneConfig{}, 1007);
  NoiseSpec noise;
  noise.pixel_sigma = 0.5;
  noise.seed = 1;
  const TrackSet tracks = render_tracks(scene, noise);
  ReconstructionMap map;
  for (int f = 0; f < int(scene.trajectory.size()); ++f) {
    Pose p = scene.trajectory[f];
    if (f > 1) {
      p.rotation = rotation_exp<double>(0.01 * testutil::random_vec3(rng).normalized()) *
                   p.rotation;
      p.translation += 0.03 * testutil::random_vec3(rng);
    }
    map.poses.emplace(f, PoseEntry{p, Provenance::Sfm});
  }
  for (const auto& [id, point] : scene.world_points) {
    map.landmarks.emplace(id, point + 0.02 * testutil::random_vec3(rng));
  }
  map.observations = observations_from_tracks(tracks.observations);
  const BaResult ba = bundle_adjust(map, scene.intrinsics, BaParams{}, BaGauge{0, 1});
  out.require(ba.accepted_costs.size() >= 2, "bundle adjustment accepted no step");
  bool strictly_decreasing = true;
  for (size_t i = 1; i < ba.accepted_costs.size(); ++i) {
    if (!(ba.accepted_costs[i] < ba.accepted_costs[i - 1])) strictly_decreasing = false;
  }
  out.require(strictly_decreasing, "accepted BA costs are not strictly decreasing");
  out.note(std::to_string(ba.accepted_costs.size() - 1) + " accepted BA steps");

  // refine_pose never raises the cost.
  bool refine_monotone = true;
  for (int trial = 0; trial < 50; ++trial) {
    Rng trng(derive_seed(1008, std::uint64_t(trial)));
    const double theta = trng.uniform(0.0, 2.0 * std::numbers::pi);
    Pose pose;
    const Vec3 eye(6.0 * std::cos(theta), 6.0 * std::sin(theta), 1.5);
    const Vec3 forward = (Vec3::Zero() - eye).normalized();
    const Vec3 right = forward.cross(Vec3::UnitZ()).normalized();
    pose.rotation.col(0) = right;
    pose.rotation.col(1) = forward.cross(right);
    pose.rotation.col(2) = forward;
    pose.translation = eye;

    std::vector<Correspondence2D3D> corrs;
    while (int(corrs.size()) < 40) {
      const Vec3 p(trng.uniform(-2.0, 2.0), trng.uniform(-2.0, 2.0), trng.uniform(-2.0, 2.0));
      const auto proj = project(p, pose, k);
      if (!proj || !in_image(proj->pixel, k)) continue;
      corrs.push_back({proj->pixel + Pixel(trng.gaussian(1.0), trng.gaussian(1.0)), p, 0});
    }
    Pose start = pose;
    start.rotation =
        rotation_exp<double>(0.08 * testutil::random_vec3(trng).normalized()) * start.rotation;
    start.translation += 0.1 * testutil::random_vec3(trng);
    const RefineResult r = refine_pose(start, corrs, k);
    if (r.final_cost > r.initial_cost) refine_monotone = false;
  }
  out.require(refine_monotone, "refine_pose increased the cost");
  return out;
}

// ---- criterion 7: oracle equivalences ------------------------------------------

Outcome criterion_oracle_equivalences() {
  Outcome out;
  const Intrinsics k{500.0, 500.0, 320.0, 240.0, 640, 480};

  Rng rng(1009);
  int tested = 0;
  double worst_roundtrip = 0.0;
  while (tested < 1000) {
    const Pose pose = testutil::random_pose(rng, 3.0);
    const Vec3 point = testutil::random_vec3(rng, 5.0);
    const auto proj = project(point, pose, k);
    if (!proj) continue;
    ++tested;
    worst_roundtrip = std::max(
        worst_roundtrip, (backproject(proj->pixel, proj->depth, k, pose) - point).norm());
  }
  out.require(worst_roundtrip <= 1e-9,
              "round-trip deviation " + fmt(worst_roundtrip) + " > 1e-9 over 1000 samples");
  out.note("worst round-trip " + fmt(worst_roundtrip) + " m");

  double worst_umeyama = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Sim3 truth = testutil::random_sim3(rng);
    std::vector<Vec3> src, dst;
    for (int i = 0; i < 40; ++i) {
      src.push_back(testutil::random_vec3(rng, 4.0));
      dst.push_back(truth.apply(src.back()));
    }
    const Sim3 est = umeyama_sim3(src, dst);
    worst_umeyama = std::max(worst_umeyama, std::abs(est.scale - truth.scale) / truth.scale);
    worst_umeyama =
        std::max(worst_umeyama, (est.rotation - truth.rotation).cwiseAbs().maxCoeff());
    worst_umeyama =
        std::max(worst_umeyama, (est.translation - truth.translation).cwiseAbs().maxCoeff());
  }
  out.require(worst_umeyama <= 1e-9,
              "similarity recovery deviation " + fmt(worst_umeyama) + " > 1e-9");
  out.note("worst similarity recovery " + fmt(worst_umeyama));

  // aggregate_metrics against an independent recount.
  for (int trial = 0; trial < 50; ++trial) {
    Rng mrng(derive_seed(1010, std::uint64_t(trial)));
    const int total = mrng.uniform_int(1, 60);
    std::vector<QueryRecord> records(total);
    int with_pose = 0, with_pred = 0, successes = 0, nl = 0, na = 0;
    double l2_sum = 0.0, angle_sum = 0.0;
    for (int i = 0; i < total; ++i) {
      QueryRecord& q = records[i];
      q.query_id = i;
      q.has_pose = mrng.bernoulli(0.75);
      q.has_prediction = q.has_pose && mrng.bernoulli(0.8);
      if (q.has_prediction) {
        q.l2_error_m = mrng.uniform(0.0, 8.0);
        if (mrng.bernoulli(0.9)) q.angle_error_rad = mrng.uniform(0.0, 3.0);
        q.success = mrng.bernoulli(0.6);
      }
      if (q.has_pose) ++with_pose;
      if (q.has_prediction) ++with_pred;
      if (q.success) ++successes;
      if (q.l2_error_m) {
        l2_sum += *q.l2_error_m;
        ++nl;
      }
      if (q.angle_error_rad) {
        angle_sum += *q.angle_error_rad;
        ++na;
      }
    }
    const MetricsReport m = aggregate_metrics(records);
    const double qwp = 100.0 * with_pose / total;
    const double succ_star = with_pose ? 100.0 * successes / with_pose : 0.0;
    const bool match = m.qwp_pct == qwp && m.succ_star_pct == succ_star &&
                       m.succ_pct == succ_star * qwp / 100.0 && m.with_prediction == with_pred &&
                       m.mean_l2_m == (nl ? l2_sum / nl : 0.0) &&
                       m.mean_angle_rad == (na ? angle_sum / na : 0.0);
    out.require(match, "aggregate_metrics deviates from the naive recomputation");
    if (!match) break;
  }
  return out;
}

// ---- criterion 8: determinism ----------------------------------------------------

Outcome criterion_determinism() {
  Outcome out;
  const fs::path dir = fresh_dir("c8");
  const PipelineConfig config = scenario_config(dir, 1011, true);

  cmd_run_all(config);
  std::map<std::string, std::string> snapshot;
  nlohmann::json manifest_first;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") {
      manifest_first = nlohmann::json::parse(io::read_text(entry.path()));
      continue;
    }
    snapshot[name] = io::read_text(entry.path());
  }

  cmd_run_all(config);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;
    const auto it = snapshot.find(name);
    out.require(it != snapshot.end(), "new artifact appeared on re-run: " + name);
    if (it == snapshot.end()) continue;
    out.require(io::read_text(entry.path()) == it->second, "artifact differs on re-run: " + name);
    ++compared;
  }
  out.require(compared == snapshot.size(), "artifact set changed on re-run");

  // Manifest: identical apart from wall-clock stage timings.
  nlohmann::json manifest_second =
      nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  manifest_first.erase("stages");
  manifest_second.erase("stages");
  out.require(manifest_first == manifest_second,
              "manifest differs beyond stage timings on re-run");

  out.note(std::to_string(compared) + " artifacts byte-identical across runs");
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria{
      {"criterion 1: zero-noise end-to-end succeeds at full coverage",
       criterion_zero_noise_end_to_end},
      {"criterion 2: hybrid beats SfM-only by the starved-query fraction",
       criterion_hybrid_ablation},
      {"criterion 3: Succ = Succ* x QwP / 100 holds exactly", criterion_metric_identity},
      {"criterion 4: PnP robust to 30% outliers at 1 px noise", criterion_pnp_robustness},
      {"criterion 5: SfM aligned accuracy (exact and noisy)", criterion_sfm_accuracy},
      {"criterion 6: Jacobians, BA monotonicity, refinement monotonicity",
       criterion_optimizer_checks},
      {"criterion 7: round-trip, similarity, and metric oracles agree",
       criterion_oracle_equivalences},
      {"criterion 8: run-all is byte-identical for a fixed seed", criterion_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s %s%s%s\n", outcome.pass ? "PASS" : "FAIL", c.name,
                outcome.detail.empty() ? "" : " -- ", outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  if (failures == 0) {
    std::printf("all %zu criteria passed\n", criteria.size());
  } else {
    std::printf("%d of %zu criteria FAILED\n", failures, criteria.size());
  }
  return failures;
}
