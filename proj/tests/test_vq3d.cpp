#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <vector>

#include "hybridloc/fuse.hpp"
#include "hybridloc/synthworld.hpp"
#include "hybridloc/vq3d.hpp"
#include "test_util.hpp"

using namespace hybridloc;

namespace {

std::vector<std::pair<int, double>> profile(const std::vector<double>& conf) {
  std::vector<std::pair<int, double>> out;
  for (size_t i = 0; i < conf.size(); ++i) out.emplace_back(int(i), conf[i]);
  return out;
}

PoseTable gt_table(const SceneTruth& scene) {
  PoseTable t;
  for (int f = 0; f < int(scene.trajectory.size()); ++f) {
    t.emplace(f, PoseEntry{scene.trajectory[f], Provenance::Pnp});
  }
  return t;
}

std::map<int, std::vector<Detection>> by_query(const std::vector<Detection>& dets) {
  std::map<int, std::vector<Detection>> out;
  for (const Detection& d : dets) out[d.query_id].push_back(d);
  return out;
}

}  // namespace

TEST_CASE("select_peak_frames: single prominent spike") {
  const auto frames = select_peak_frames(profile({0.1, 0.9, 0.1}), 0.5);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0] == 1);
}

TEST_CASE("select_peak_frames: monotone sequence resolves to the last frame") {
  const auto frames = select_peak_frames(profile({0.1, 0.3, 0.5, 0.7, 0.95}), 0.2);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0] == 4);
}

TEST_CASE("select_peak_frames: flat sequence falls back to the first maximum") {
  const auto frames = select_peak_frames(profile({0.4, 0.4, 0.4, 0.4}), 0.1);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0] == 0);
}

TEST_CASE("select_peak_frames: multiple peaks above prominence are all returned") {
  const auto frames = select_peak_frames(profile({0.1, 0.8, 0.2, 0.7, 0.1}), 0.3);
  CHECK(frames == std::vector<int>{1, 3});
}

TEST_CASE("select_peak_frames: shallow bumps fall back to the global maximum") {
  const auto frames = select_peak_frames(profile({0.50, 0.52, 0.50, 0.51, 0.50}), 0.3);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0] == 1);
}

TEST_CASE("lift_detection: identity pose and unit intrinsics") {
  Detection det;
  det.center = Pixel(0, 0);
  det.depth = 3.0;
  const Intrinsics unit{1.0, 1.0, 0.0, 0.0, 2, 2};
  CHECK((lift_detection(det, Pose{}, unit) - Vec3(0, 0, 3)).norm() == 0.0);

  det.depth = 0.0;
  CHECK_THROWS_AS(lift_detection(det, Pose{}, unit), std::invalid_argument);
}

TEST_CASE("lift_detection reproduces ground truth on zero-noise detections") {
  const SceneTruth scene = generate_scene(SceneConfig{}, 81);
  const auto dets = make_detections(scene, NoiseSpec{});
  for (const Detection& d : dets) {
    const Vec3 lifted = lift_detection(d, scene.trajectory[d.frame], scene.intrinsics);
    CHECK((lifted - scene.queries[d.query_id].object).norm() <= 1e-9);
  }
}

TEST_CASE("aggregate_prediction: fixed cases") {
  CHECK((aggregate_prediction(std::vector<std::pair<Vec3, double>>{{Vec3(1, 2, 3), 0.4}}) -
         Vec3(1, 2, 3))
            .norm() <= 1e-15);

  const std::vector<std::pair<Vec3, double>> two{{Vec3(0, 0, 0), 0.5}, {Vec3(2, 4, 6), 0.5}};
  CHECK((aggregate_prediction(two) - Vec3(1, 2, 3)).norm() <= 1e-15);

  const std::vector<std::pair<Vec3, double>> skew{{Vec3(0, 0, 0), 0.9}, {Vec3(10, 0, 0), 0.1}};
  CHECK((aggregate_prediction(skew) - Vec3(1, 0, 0)).norm() <= 1e-15);

  CHECK_THROWS_AS(aggregate_prediction({}), std::invalid_argument);
}

TEST_CASE("aggregate_prediction: confidence scale invariance") {
  Rng rng(82);
  std::vector<std::pair<Vec3, double>> lifted;
  for (int i = 0; i < 7; ++i) {
    lifted.emplace_back(testutil::random_vec3(rng, 4.0), rng.uniform(0.1, 1.0));
  }
  const Vec3 base = aggregate_prediction(lifted);

  // Power-of-two scaling is exact in floating point.
  auto scaled = lifted;
  for (auto& [p, c] : scaled) c *= 4.0;
  CHECK(aggregate_prediction(scaled) == base);

  // General positive scaling agrees to rounding.
  scaled = lifted;
  for (auto& [p, c] : scaled) c *= 3.7;
  CHECK((aggregate_prediction(scaled) - base).norm() <= 1e-12);
}

TEST_CASE("predict_query: zero-noise full coverage reproduces the offset") {
  const SceneTruth scene = generate_scene(SceneConfig{}, 83);
  const auto dets = by_query(make_detections(scene, NoiseSpec{}));
  const PoseTable poses = gt_table(scene);

  for (const SceneQuery& q : scene.queries) {
    const Prediction pred =
        predict_query(dets.at(q.query_id), poses, scene.intrinsics, q.query_frame, {});
    REQUIRE(pred.status == PredictionStatus::Ok);
    CHECK(pred.views_used >= 1);
    CHECK((pred.object_world - q.object).norm() <= 1e-9);
    const Vec3 gt_offset = q.object - scene.trajectory[q.query_frame].translation;
    CHECK((pred.displacement - gt_offset).norm() <= 1e-9);
  }
}

TEST_CASE("predict_query: missing query-frame pose yields NO_POSE, hybrid recovers it") {
  SceneConfig config;
  config.dropped_segment = {{8, 12}};
  const SceneTruth scene = generate_scene(config, 84);
  const auto dets = by_query(make_detections(scene, NoiseSpec{}));

  // Ground-truth stand-ins for the two pose sources: SfM lacks the segment.
  PoseTable sfm_only, pnp;
  for (int f = 0; f < int(scene.trajectory.size()); ++f) {
    if (f < 8 || f > 12) {
      sfm_only.emplace(f, PoseEntry{scene.trajectory[f], Provenance::Sfm});
    }
    pnp.emplace(f, PoseEntry{scene.trajectory[f], Provenance::Pnp});
  }
  const PoseTable hybrid = union_poses(sfm_only, pnp, UnionPolicy{});

  const SceneQuery* in_segment = nullptr;
  for (const SceneQuery& q : scene.queries) {
    if (q.query_frame >= 8 && q.query_frame <= 12) in_segment = &q;
  }
  REQUIRE(in_segment != nullptr);

  const Prediction starved = predict_query(dets.at(in_segment->query_id), sfm_only,
                                           scene.intrinsics, in_segment->query_frame, {});
  CHECK(starved.status == PredictionStatus::NoPose);

  const Prediction recovered = predict_query(dets.at(in_segment->query_id), hybrid,
                                             scene.intrinsics, in_segment->query_frame, {});
  CHECK(recovered.status == PredictionStatus::Ok);
}

TEST_CASE("predict_query: hybrid OK-set contains each single-source OK-set") {
  SceneConfig config;
  config.dropped_segment = {{8, 12}};
  const SceneTruth scene = generate_scene(config, 85);
  const auto dets = by_query(make_detections(scene, NoiseSpec{}));

  PoseTable sfm_only, pnp_sparse;
  for (int f = 0; f < int(scene.trajectory.size()); ++f) {
    if (f < 8 || f > 12) sfm_only.emplace(f, PoseEntry{scene.trajectory[f], Provenance::Sfm});
    if (f % 2 == 0) pnp_sparse.emplace(f, PoseEntry{scene.trajectory[f], Provenance::Pnp});
  }
  const PoseTable hybrid = union_poses(sfm_only, pnp_sparse, UnionPolicy{});

  for (const SceneQuery& q : scene.queries) {
    const auto status = [&](const PoseTable& t) {
      return predict_query(dets.at(q.query_id), t, scene.intrinsics, q.query_frame, {}).status;
    };
    if (status(sfm_only) == PredictionStatus::Ok) {
      CHECK(status(hybrid) == PredictionStatus::Ok);
    }
    if (status(pnp_sparse) == PredictionStatus::Ok) {
      CHECK(status(hybrid) == PredictionStatus::Ok);
    }
  }
}

TEST_CASE("predict_query: no detections at all yields NO_DETECTION") {
  const SceneTruth scene = generate_scene(SceneConfig{}, 86);
  const PoseTable poses = gt_table(scene);
  const Prediction pred =
      predict_query(std::vector<Detection>{}, poses, scene.intrinsics, 3, {});
  CHECK(pred.status == PredictionStatus::NoDetection);
}

TEST_CASE("predict_query: detections whose frames all lack poses yield NO_DETECTION") {
  const SceneTruth scene = generate_scene(SceneConfig{}, 87);
  const auto dets = by_query(make_detections(scene, NoiseSpec{}));
  const SceneQuery& q = scene.queries.front();

  // Keep only the query-frame pose; no detection frame stays posed unless it
  // happens to be the query frame itself.
  PoseTable sparse;
  sparse.emplace(q.query_frame, PoseEntry{scene.trajectory[q.query_frame], Provenance::Pnp});
  std::vector<Detection> filtered;
  for (const Detection& d : dets.at(q.query_id)) {
    if (d.frame != q.query_frame) filtered.push_back(d);
  }
  REQUIRE(!filtered.empty());
  const Prediction pred =
      predict_query(filtered, sparse, scene.intrinsics, q.query_frame, {});
  CHECK(pred.status == PredictionStatus::NoDetection);
}

TEST_CASE("predict_query: rigid transform of poses moves the prediction rigidly") {
  const SceneTruth scene = generate_scene(SceneConfig{}, 88);
  const auto dets = by_query(make_detections(scene, NoiseSpec{}));
  const PoseTable poses = gt_table(scene);

  Rng rng(89);
  Sim3 rigid = testutil::random_sim3(rng);
  rigid.scale = 1.0;

  PoseTable moved;
  for (const auto& [frame, entry] : poses) {
    moved.emplace(frame, PoseEntry{apply_sim3(rigid, entry.pose), entry.provenance});
  }

  for (const SceneQuery& q : scene.queries) {
    const Prediction a =
        predict_query(dets.at(q.query_id), poses, scene.intrinsics, q.query_frame, {});
    const Prediction b =
        predict_query(dets.at(q.query_id), moved, scene.intrinsics, q.query_frame, {});
    REQUIRE(a.status == PredictionStatus::Ok);
    REQUIRE(b.status == PredictionStatus::Ok);
    CHECK((b.object_world - rigid.apply(a.object_world)).norm() <= 1e-9);
    CHECK(std::abs(b.displacement.norm() - a.displacement.norm()) <= 1e-9);
  }
}
