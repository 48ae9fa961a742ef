#include "hybridloc/synthworld.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hybridloc/rng.hpp"

namespace hybridloc {

namespace {

void validate(const SceneConfig& c) {
  if (c.num_points < 8) throw std::invalid_argument("scene config: need at least 8 world points");
  if (c.num_frames < 2) throw std::invalid_argument("scene config: need at least 2 frames");
  if (c.num_queries < 0) throw std::invalid_argument("scene config: negative query count");
  if (c.num_scan_keypoints < 1 || c.num_scan_keypoints > c.num_points) {
    throw std::invalid_argument("scene config: scan keypoints must be in [1, num_points]");
  }
  if (c.point_extent <= 0.0 || c.ring_radius <= 0.0) {
    throw std::invalid_argument("scene config: extents must be positive");
  }
  if (!c.intrinsics.valid()) throw std::invalid_argument("scene config: invalid intrinsics");
  if (c.dropped_segment) {
    const auto [a, b] = *c.dropped_segment;
    if (a < 0 || b < a || b >= c.num_frames) {
      throw std::invalid_argument("scene config: dropped segment out of range");
    }
  }
}

void validate(const NoiseSpec& n) {
  if (n.pixel_sigma < 0.0 || n.depth_sigma < 0.0) {
    throw std::invalid_argument("noise spec: sigmas must be non-negative");
  }
  if (n.outlier_rate < 0.0 || n.outlier_rate >= 1.0) {
    throw std::invalid_argument("noise spec: outlier_rate must be in [0,1)");
  }
  if (n.dropout_rate < 0.0 || n.dropout_rate > 1.0) {
    throw std::invalid_argument("noise spec: dropout_rate must be in [0,1]");
  }
}

Pose look_at(const Vec3& eye, const Vec3& target) {
  // Camera frame: x right, y down, z forward; world up is +z.
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) {
    right = forward.cross(Vec3::UnitY());
  }
  right.normalize();
  const Vec3 down = forward.cross(right);
  Pose p;
  p.rotation.col(0) = right;
  p.rotation.col(1) = down;
  p.rotation.col(2) = forward;
  p.translation = eye;
  return p;
}

bool visible(const Vec3& point, const Pose& pose, const Intrinsics& k) {
  const auto proj = project(point, pose, k);
  return proj && in_image(proj->pixel, k);
}

std::vector<Pose> make_trajectory(const SceneConfig& c, Rng& rng) {
  const int knots = std::clamp(c.waypoints, 2, c.num_frames);
  const double arc = c.arc_degrees * std::numbers::pi / 180.0;

  std::vector<Vec3> positions(knots);
  std::vector<Eigen::Quaterniond> orientations(knots);
  for (int w = 0; w < knots; ++w) {
    const double theta = arc * w / (knots - 1);
    const Vec3 eye(c.ring_radius * std::cos(theta), c.ring_radius * std::sin(theta),
                   c.ring_height + 0.3 * std::sin(2.0 * theta));
    const Vec3 target(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.2, 0.2));
    positions[w] = eye;
    orientations[w] = Eigen::Quaterniond(look_at(eye, target).rotation);
  }

  // Piecewise-linear positions, slerped orientations between the knots.
  std::vector<Pose> poses(c.num_frames);
  for (int f = 0; f < c.num_frames; ++f) {
    const double u = (c.num_frames == 1) ? 0.0
                                         : double(f) / double(c.num_frames - 1) * (knots - 1);
    const int i = std::min(int(u), knots - 2);
    const double alpha = u - i;
    poses[f].translation = (1.0 - alpha) * positions[i] + alpha * positions[i + 1];
    poses[f].rotation = orientations[i].slerp(alpha, orientations[i + 1]).toRotationMatrix();
  }
  return poses;
}

bool scene_feasible(const SceneTruth& s, const SceneConfig& c) {
  const int need = std::min(6, c.num_scan_keypoints);
  for (const Pose& pose : s.trajectory) {
    int seen = 0;
    for (int id : s.scan_keypoint_ids) {
      if (visible(s.world_points.at(id), pose, s.intrinsics)) ++seen;
    }
    if (seen < need) return false;
  }
  for (const SceneQuery& q : s.queries) {
    bool seen = false;
    for (const Pose& pose : s.trajectory) {
      if (visible(q.object, pose, s.intrinsics)) {
        seen = true;
        break;
      }
    }
    if (!seen) return false;
  }
  return true;
}

SceneTruth generate_attempt(const SceneConfig& c, Rng rng) {
  SceneTruth s;
  s.intrinsics = c.intrinsics;
  s.dropped_segment = c.dropped_segment;

  Rng point_rng = rng.derive("points");
  for (int i = 0; i < c.num_points; ++i) {
    s.world_points.emplace(i, Vec3(point_rng.uniform(-c.point_extent, c.point_extent),
                                   point_rng.uniform(-c.point_extent, c.point_extent),
                                   point_rng.uniform(-c.point_extent, c.point_extent)));
  }

  // Fisher-Yates prefix to pick the keypoint subset.
  Rng key_rng = rng.derive("keypoints");
  std::vector<int> ids(c.num_points);
  for (int i = 0; i < c.num_points; ++i) ids[i] = i;
  for (int i = 0; i < c.num_scan_keypoints; ++i) {
    std::swap(ids[i], ids[key_rng.uniform_int(i, c.num_points - 1)]);
  }
  s.scan_keypoint_ids.assign(ids.begin(), ids.begin() + c.num_scan_keypoints);
  std::sort(s.scan_keypoint_ids.begin(), s.scan_keypoint_ids.end());

  Rng traj_rng = rng.derive("trajectory");
  s.trajectory = make_trajectory(c, traj_rng);

  Rng query_rng = rng.derive("queries");
  for (int q = 0; q < c.num_queries; ++q) {
    SceneQuery query;
    query.query_id = q;
    query.query_frame = (q + 1) * c.num_frames / (c.num_queries + 1);
    const double inner = 0.75 * c.point_extent;
    for (int attempt = 0; attempt < 64; ++attempt) {
      query.object = Vec3(query_rng.uniform(-inner, inner), query_rng.uniform(-inner, inner),
                          query_rng.uniform(-inner, inner));
      bool seen = false;
      for (const Pose& pose : s.trajectory) {
        if (visible(query.object, pose, s.intrinsics)) {
          seen = true;
          break;
        }
      }
      if (seen) break;
    }
    s.queries.push_back(query);
  }
  return s;
}

}  // namespace

SceneTruth generate_scene(const SceneConfig& config, std::uint64_t seed) {
  validate(config);
  Rng root(derive_seed(seed, "scene"));
  for (int attempt = 0; attempt < 16; ++attempt) {
    SceneTruth s = generate_attempt(config, root.derive(std::uint64_t(attempt)));
    if (scene_feasible(s, config)) return s;
  }
  throw std::invalid_argument(
      "generate_scene: no attempt produced a scene where every frame sees "
      "enough scan keypoints and every object is visible");
}

TrackSet render_tracks(const SceneTruth& scene, const NoiseSpec& noise) {
  validate(noise);
  Rng rng(derive_seed(noise.seed, "tracks"));
  Rng obs_noise = rng.derive("obs");
  Rng match_noise = rng.derive("match");
  Rng dropout = rng.derive("dropout");
  Rng outliers = rng.derive("outliers");

  const auto& keys = scene.scan_keypoint_ids;
  const int num_frames = int(scene.trajectory.size());

  TrackSet out;
  for (int f = 0; f < num_frames; ++f) {
    const Pose& pose = scene.trajectory[f];
    const bool in_dropped_segment =
        scene.dropped_segment && f >= scene.dropped_segment->first &&
        f <= scene.dropped_segment->second;
    for (const auto& [id, point] : scene.world_points) {
      const auto proj = project(point, pose, scene.intrinsics);
      if (!proj || !in_image(proj->pixel, scene.intrinsics)) continue;

      if (!in_dropped_segment && !dropout.bernoulli(noise.dropout_rate)) {
        const Pixel px = proj->pixel + Pixel(obs_noise.gaussian(noise.pixel_sigma),
                                             obs_noise.gaussian(noise.pixel_sigma));
        if (in_image(px, scene.intrinsics)) {
          out.observations.push_back({f, id, px, proj->depth});
        }
      }

      if (std::binary_search(keys.begin(), keys.end(), id)) {
        if (dropout.bernoulli(noise.dropout_rate)) continue;
        const Pixel px = proj->pixel + Pixel(match_noise.gaussian(noise.pixel_sigma),
                                             match_noise.gaussian(noise.pixel_sigma));
        if (!in_image(px, scene.intrinsics)) continue;
        KeypointMatch m{f, id, px, false};
        if (keys.size() >= 2 && outliers.bernoulli(noise.outlier_rate)) {
          // Swap in a different keypoint id: a wrong 2D-3D association.
          int other = outliers.uniform_int(0, int(keys.size()) - 2);
          const int own = int(std::lower_bound(keys.begin(), keys.end(), id) - keys.begin());
          if (other >= own) ++other;
          m.point_id = keys[other];
          m.is_outlier = true;
        }
        out.matches.push_back(m);
      }
    }
  }
  return out;
}

std::vector<Detection> make_detections(const SceneTruth& scene, const NoiseSpec& noise) {
  validate(noise);
  Rng rng(derive_seed(noise.seed, "detections"));

  std::vector<Detection> out;
  for (const SceneQuery& q : scene.queries) {
    Rng qrng = rng.derive(std::uint64_t(q.query_id));

    std::vector<std::pair<int, Projection>> sightings;
    for (int f = 0; f < int(scene.trajectory.size()); ++f) {
      const auto proj = project(q.object, scene.trajectory[f], scene.intrinsics);
      if (proj && in_image(proj->pixel, scene.intrinsics)) sightings.emplace_back(f, *proj);
    }
    if (sightings.empty()) continue;

    const int n = int(sightings.size());
    const int peak = (n >= 3) ? qrng.uniform_int(1, n - 2) : 0;
    const double width = std::max(double(n) / 6.0, 1.0);
    // Jitter stays under a quarter of the bump's first step off the peak, so
    // the interior maximum is strict for any profile length.
    const double step = 0.7 * (1.0 - std::exp(-1.0 / (2.0 * width * width)));
    const double jitter = std::min(0.004, 0.25 * step);

    for (int i = 0; i < n; ++i) {
      const auto& [frame, proj] = sightings[i];
      Detection d;
      d.query_id = q.query_id;
      d.frame = frame;
      d.center = proj.pixel + Pixel(qrng.gaussian(noise.pixel_sigma),
                                    qrng.gaussian(noise.pixel_sigma));
      d.depth = std::max(proj.depth + qrng.gaussian(noise.depth_sigma), 1e-3);
      const double di = double(i - peak);
      const double bump = 0.25 + 0.7 * std::exp(-di * di / (2.0 * width * width));
      d.confidence = std::clamp(bump + qrng.uniform(-jitter, jitter), 0.05, 0.999);
      out.push_back(d);
    }
  }
  return out;
}

double mean_scene_depth(const SceneTruth& scene) {
  double sum = 0.0;
  long count = 0;
  for (const Pose& pose : scene.trajectory) {
    for (const auto& [id, point] : scene.world_points) {
      const auto proj = project(point, pose, scene.intrinsics);
      if (proj && in_image(proj->pixel, scene.intrinsics)) {
        sum += proj->depth;
        ++count;
      }
    }
  }
  return count > 0 ? sum / double(count) : 0.0;
}

}  // namespace hybridloc
