#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "hybridloc/geometry.hpp"
#include "hybridloc/vq3d.hpp"

// Ground-truth oracle: deterministic synthetic scenes with an egocentric
// camera orbit, scan keypoints, noisy track/match rendering, and per-query
// object detections. Everything downstream is testable against these worlds.

namespace hybridloc {

struct SceneConfig {
  int num_points = 200;
  int num_frames = 20;
  int num_queries = 5;
  int num_scan_keypoints = 60;
  double point_extent = 2.0;   // half-width of the point-cloud box
  double ring_radius = 6.0;    // camera orbit radius
  double ring_height = 1.5;    // mean camera height above the cloud center
  double arc_degrees = 300.0;  // orbit sweep
  int waypoints = 5;           // interpolation knots along the orbit
  Intrinsics intrinsics{500.0, 500.0, 320.0, 240.0, 640, 480};
  // Frames in [first, last] contribute no track observations while their
  // scan-keypoint matches stay intact: SfM is starved there, relocalization
  // is not.
  std::optional<std::pair<int, int>> dropped_segment;
};

struct SceneQuery {
  int query_id = 0;
  Vec3 object = Vec3::Zero();  // ground-truth object center
  int query_frame = 0;
};

struct SceneTruth {
  std::map<int, Vec3> world_points;
  std::vector<int> scan_keypoint_ids;  // sorted subset of world point ids
  std::vector<Pose> trajectory;        // camera-to-world, one per frame
  Intrinsics intrinsics;
  std::vector<SceneQuery> queries;
  std::optional<std::pair<int, int>> dropped_segment;
};

struct NoiseSpec {
  double pixel_sigma = 0.0;   // px
  double outlier_rate = 0.0;  // [0, 1): wrong-id fraction among scan matches
  double depth_sigma = 0.0;   // meters, detections only
  double dropout_rate = 0.0;  // [0, 1]: track observations removed
  std::uint64_t seed = 0;
};

struct TrackObservation {
  int frame = 0;
  int point_id = 0;
  Pixel pixel = Pixel::Zero();
  double depth = 0.0;  // exact camera-frame depth
};

struct KeypointMatch {
  int frame = 0;
  int point_id = 0;
  Pixel pixel = Pixel::Zero();
  bool is_outlier = false;  // diagnostic only, never serialized
};

struct TrackSet {
  std::vector<TrackObservation> observations;  // every world point (SfM input)
  std::vector<KeypointMatch> matches;          // scan keypoints only (PnP input)
};

// Deterministic in (config, seed). Throws std::invalid_argument on infeasible
// configs. The generator re-draws until every frame sees at least
// min(6, num_scan_keypoints) keypoints and every object is visible somewhere,
// then fails if no attempt satisfies that.
SceneTruth generate_scene(const SceneConfig& config, std::uint64_t seed);

// Projects every world point into every frame where it is visible, then
// applies pixel noise, dropout, and scan-match id corruption. Output is
// sorted by (frame, point_id). Deterministic in noise.seed.
TrackSet render_tracks(const SceneTruth& scene, const NoiseSpec& noise);

// Per-query detections for every frame where the object is visible, with a
// confidence profile that carries at least one strict interior peak whenever
// three or more frames see the object. Sorted by (query_id, frame).
std::vector<Detection> make_detections(const SceneTruth& scene, const NoiseSpec& noise);

// Mean camera-frame depth of all visible (point, frame) pairs; the scene's
// natural length scale for error thresholds.
double mean_scene_depth(const SceneTruth& scene);

}  // namespace hybridloc
