#include "hybridloc/minisfm.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "hybridloc/reprojection.hpp"
#include "hybridloc/rng.hpp"

namespace hybridloc {

namespace {

// Isotropic (Hartley) conditioning of 2D points.
struct Conditioning {
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
};

Conditioning condition_points(std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= double(pts.size());
  double mean_norm = 0.0;
  for (const auto& p : pts) mean_norm += (p - centroid).norm();
  mean_norm /= double(pts.size());
  const double s = mean_norm > 1e-15 ? std::sqrt(2.0) / mean_norm : 1.0;

  Conditioning c;
  c.t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  for (auto& p : pts) p = s * (p - centroid);
  return c;
}

// Triangulation from two normalized projection matrices [R | t].
Vec3 triangulate_normalized(const Eigen::Matrix<double, 3, 4>& pa,
                            const Eigen::Matrix<double, 3, 4>& pb, const Eigen::Vector2d& xa,
                            const Eigen::Vector2d& xb) {
  Eigen::Matrix4d a;
  a.row(0) = xa.x() * pa.row(2) - pa.row(0);
  a.row(1) = xa.y() * pa.row(2) - pa.row(1);
  a.row(2) = xb.x() * pb.row(2) - pb.row(0);
  a.row(3) = xb.y() * pb.row(2) - pb.row(1);

  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d x = svd.matrixV().col(3);
  if (std::abs(x(3)) <= 1e-12 * x.head<3>().norm()) {
    throw DegenerateGeometryError("triangulate: point at infinity (parallel rays)");
  }
  return x.head<3>() / x(3);
}

Eigen::Matrix<double, 3, 4> world_to_camera_matrix(const Pose& pose) {
  const Pose inv = pose.inverse();
  Eigen::Matrix<double, 3, 4> p;
  p.leftCols<3>() = inv.rotation;
  p.col(3) = inv.translation;
  return p;
}

}  // namespace

Mat3 estimate_essential(std::span<const NormalizedPair> pairs) {
  const int n = int(pairs.size());
  if (n < 8) throw std::invalid_argument("estimate_essential: need at least 8 pairs");

  std::vector<Eigen::Vector2d> x1(n), x2(n);
  for (int i = 0; i < n; ++i) {
    x1[i] = pairs[i].first;
    x2[i] = pairs[i].second;
  }
  const Conditioning c1 = condition_points(x1);
  const Conditioning c2 = condition_points(x2);

  Eigen::MatrixXd a(n, 9);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d p1(x1[i].x(), x1[i].y(), 1.0);
    const Eigen::Vector3d p2(x2[i].x(), x2[i].y(), 1.0);
    // Coefficient of E_jk is x2_j * x1_k, row-major.
    a.row(i) << p2.x() * p1.x(), p2.x() * p1.y(), p2.x(), p2.y() * p1.x(), p2.y() * p1.y(),
        p2.y(), p1.x(), p1.y(), 1.0;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(7) <= 1e-9 * sv(0)) {
    throw DegenerateGeometryError("estimate_essential: degenerate configuration (rank < 8)");
  }

  const Eigen::VectorXd e = svd.matrixV().col(8);
  Mat3 est;
  est << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  est = c2.t.transpose() * est * c1.t;

  // Project onto the essential manifold: rank 2 with equal singular values.
  Eigen::JacobiSVD<Mat3> esvd(est, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double s = (esvd.singularValues()(0) + esvd.singularValues()(1)) / 2.0;
  Mat3 out = esvd.matrixU() * Eigen::Vector3d(s, s, 0.0).asDiagonal() *
             esvd.matrixV().transpose();
  return out / out.norm();
}

Pose decompose_essential(const Mat3& e, std::span<const PixelPair> corrs, const Intrinsics& k) {
  if (corrs.empty()) throw std::invalid_argument("decompose_essential: need correspondences");

  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;

  Mat3 r1 = svd.matrixU() * w * svd.matrixV().transpose();
  Mat3 r2 = svd.matrixU() * w.transpose() * svd.matrixV().transpose();
  if (r1.determinant() < 0) r1 = -r1;
  if (r2.determinant() < 0) r2 = -r2;
  const Vec3 t = svd.matrixU().col(2);

  const Eigen::Matrix<double, 3, 4> pa = Eigen::Matrix<double, 3, 4>::Identity();

  int best_count = -1;
  Mat3 best_r;
  Vec3 best_t;
  for (const Mat3& r : {r1, r2}) {
    for (const double sign : {1.0, -1.0}) {
      const Vec3 tc = sign * t;
      Eigen::Matrix<double, 3, 4> pb;
      pb.leftCols<3>() = r;
      pb.col(3) = tc;

      int in_front = 0;
      for (const auto& [px_a, px_b] : corrs) {
        const Eigen::Vector2d xa = k.ray(px_a).head<2>();
        const Eigen::Vector2d xb = k.ray(px_b).head<2>();
        Vec3 point;
        try {
          point = triangulate_normalized(pa, pb, xa, xb);
        } catch (const DegenerateGeometryError&) {
          continue;
        }
        const double z1 = point.z();
        const double z2 = (r * point + tc).z();
        if (z1 > 0.0 && z2 > 0.0) ++in_front;
      }
      if (in_front > best_count) {
        best_count = in_front;
        best_r = r;
        best_t = tc;
      }
    }
  }

  if (2 * best_count <= int(corrs.size())) {
    throw DegenerateGeometryError("decompose_essential: no factorization passes chirality");
  }

  // (best_r, best_t) maps camera-1 coords to camera-2 coords; invert for the
  // camera-to-world pose of the second camera in the first camera's frame.
  Pose out;
  out.rotation = best_r.transpose();
  out.translation = -(best_r.transpose() * best_t);
  return out;
}

Vec3 triangulate(const Pose& pose_a, const Pose& pose_b, const Intrinsics& k, const Pixel& px_a,
                 const Pixel& px_b) {
  if ((pose_a.translation - pose_b.translation).norm() <= 1e-12) {
    throw DegenerateGeometryError("triangulate: identical camera centers");
  }
  return triangulate_normalized(world_to_camera_matrix(pose_a), world_to_camera_matrix(pose_b),
                                k.ray(px_a).head<2>(), k.ray(px_b).head<2>());
}

namespace {

// Mutable optimization state: world-to-camera params plus landmark positions.
struct BaState {
  std::vector<CameraParam> cams;
  std::vector<Vec3> points;
};

struct BaProblem {
  std::vector<int> frames;        // slot -> frame
  std::map<int, int> pose_slot;   // frame -> slot
  std::vector<int> ids;           // slot -> landmark id
  std::map<int, int> point_slot;  // id -> slot
  struct Obs {
    int pose = 0;   // pose slot
    int point = 0;  // point slot
    Pixel pixel = Pixel::Zero();
  };
  std::vector<Obs> obs;  // entry-valid observations only
  int fixed_slot = 0;
  int scale_slot = 0;
  double gauge_distance = 0.0;
};

double state_cost(const BaState& s, const BaProblem& p, const Intrinsics& k, double delta) {
  double cost = 0.0;
  for (const auto& o : p.obs) {
    const ReprojResidual r = reprojection_residual(s.cams[o.pose], s.points[o.point], o.pixel, k);
    if (!r.valid) return std::numeric_limits<double>::infinity();
    cost += huber_cost(r.r.norm(), delta);
  }
  return cost;
}

// Rescales every center and landmark about the fixed camera so the gauge
// distance returns to its entry value. Reprojection is similarity-invariant,
// so this does not change the cost beyond rounding.
void renormalize_scale(BaState& s, const BaProblem& p) {
  const Vec3 c_fixed = s.cams[p.fixed_slot].to_pose().translation;
  const Vec3 c_scale = s.cams[p.scale_slot].to_pose().translation;
  const double now = (c_scale - c_fixed).norm();
  if (now <= 1e-12 || p.gauge_distance <= 1e-12) return;
  const double factor = p.gauge_distance / now;
  for (auto& cam : s.cams) {
    Pose pose = cam.to_pose();
    pose.translation = c_fixed + factor * (pose.translation - c_fixed);
    cam = CameraParam::from_pose(pose);
  }
  for (auto& x : s.points) x = c_fixed + factor * (x - c_fixed);
}

}  // namespace

BaResult bundle_adjust(const ReconstructionMap& map, const Intrinsics& k, const BaParams& params,
                       const BaGauge& gauge) {
  if (params.max_iterations < 1 || params.huber_delta_px <= 0.0 || params.initial_lambda <= 0.0) {
    throw std::invalid_argument("bundle_adjust: invalid parameters");
  }
  if (!map.poses.count(gauge.fixed_frame) || !map.poses.count(gauge.scale_frame) ||
      gauge.fixed_frame == gauge.scale_frame) {
    throw std::invalid_argument("bundle_adjust: gauge frames must be two distinct posed frames");
  }

  BaProblem prob;
  BaState state;
  for (const auto& [frame, entry] : map.poses) {
    prob.pose_slot.emplace(frame, int(prob.frames.size()));
    prob.frames.push_back(frame);
    state.cams.push_back(CameraParam::from_pose(entry.pose));
  }
  for (const auto& [id, pos] : map.landmarks) {
    prob.point_slot.emplace(id, int(prob.ids.size()));
    prob.ids.push_back(id);
    state.points.push_back(pos);
  }
  prob.fixed_slot = prob.pose_slot.at(gauge.fixed_frame);
  prob.scale_slot = prob.pose_slot.at(gauge.scale_frame);
  prob.gauge_distance = (map.poses.at(gauge.scale_frame).pose.translation -
                         map.poses.at(gauge.fixed_frame).pose.translation)
                            .norm();

  for (const Observation& o : map.observations) {
    const auto pit = prob.pose_slot.find(o.frame);
    const auto lit = prob.point_slot.find(o.point_id);
    if (pit == prob.pose_slot.end() || lit == prob.point_slot.end()) continue;
    const ReprojResidual r =
        reprojection_residual(state.cams[pit->second], state.points[lit->second], o.pixel, k);
    if (!r.valid) continue;  // behind-camera at entry: excluded from this run
    prob.obs.push_back({pit->second, lit->second, o.pixel});
  }

  const double delta = params.huber_delta_px;
  const int num_pose_params = 6 * int(state.cams.size());

  BaResult result;
  double cost = state_cost(state, prob, k, delta);
  result.accepted_costs.push_back(cost);

  double lambda = params.initial_lambda;
  int it = 0;
  for (; it < params.max_iterations; ++it) {
    // Accumulate the normal equations, landmarks kept separable.
    Eigen::MatrixXd h_pp = Eigen::MatrixXd::Zero(num_pose_params, num_pose_params);
    Eigen::VectorXd g_p = Eigen::VectorXd::Zero(num_pose_params);
    const int num_points = int(state.points.size());
    std::vector<Mat3> h_ll(num_points, Mat3::Zero());
    std::vector<Vec3> g_l(num_points, Vec3::Zero());
    // Per landmark: the pose blocks W = d r/d pose ^T d r/d point.
    std::vector<std::vector<std::pair<int, Eigen::Matrix<double, 6, 3>>>> w_blocks(num_points);

    for (const auto& o : prob.obs) {
      const ReprojResidual r =
          reprojection_residual(state.cams[o.pose], state.points[o.point], o.pixel, k);
      if (!r.valid) continue;
      const double weight = huber_weight(r.r.norm(), delta);

      const Mat26 jc = r.j_camera;
      const Mat23 jp = r.j_point;
      h_ll[o.point] += weight * jp.transpose() * jp;
      g_l[o.point] += weight * jp.transpose() * r.r;

      if (o.pose != prob.fixed_slot) {
        const int base = 6 * o.pose;
        h_pp.block<6, 6>(base, base) += weight * jc.transpose() * jc;
        g_p.segment<6>(base) += weight * jc.transpose() * r.r;
        w_blocks[o.point].emplace_back(o.pose, weight * jc.transpose() * jp);
      }
    }

    bool accepted = false;
    while (lambda <= 1e16) {
      // Damped landmark blocks and their inverses.
      std::vector<Mat3> h_ll_inv(num_points);
      for (int j = 0; j < num_points; ++j) {
        Mat3 damped = h_ll[j];
        damped.diagonal() += lambda * damped.diagonal().cwiseMax(1e-12);
        h_ll_inv[j] = damped.inverse();
      }

      // Schur complement on the landmarks.
      Eigen::MatrixXd s = h_pp;
      for (int d = 0; d < num_pose_params; ++d) {
        s(d, d) += lambda * std::max(h_pp(d, d), 1e-12);
      }
      Eigen::VectorXd rhs = -g_p;
      for (int j = 0; j < num_points; ++j) {
        const auto& blocks = w_blocks[j];
        if (blocks.empty()) continue;
        const Vec3 hinv_gl = h_ll_inv[j] * g_l[j];
        for (const auto& [pa, wa] : blocks) {
          rhs.segment<6>(6 * pa) += wa * hinv_gl;
          const Eigen::Matrix<double, 6, 3> wa_hinv = wa * h_ll_inv[j];
          for (const auto& [pb, wb] : blocks) {
            s.block<6, 6>(6 * pa, 6 * pb) -= wa_hinv * wb.transpose();
          }
        }
      }

      // The fixed pose keeps an identity block so the solve stays regular.
      const int fb = 6 * prob.fixed_slot;
      s.block<6, 6>(fb, fb).setIdentity();
      for (int d = 0; d < 6; ++d) {
        s.row(fb + d).segment(0, num_pose_params).setZero();
        s.col(fb + d).segment(0, num_pose_params).setZero();
        s(fb + d, fb + d) = 1.0;
        rhs(fb + d) = 0.0;
      }

      const Eigen::VectorXd delta_p = s.ldlt().solve(rhs);

      BaState candidate = state;
      for (size_t slot = 0; slot < state.cams.size(); ++slot) {
        if (int(slot) == prob.fixed_slot) continue;
        candidate.cams[slot] = state.cams[slot].updated(delta_p.segment<6>(6 * int(slot)));
      }
      for (int j = 0; j < num_points; ++j) {
        Vec3 rhs_l = -g_l[j];
        for (const auto& [pa, wa] : w_blocks[j]) {
          rhs_l -= wa.transpose() * delta_p.segment<6>(6 * pa);
        }
        candidate.points[j] += h_ll_inv[j] * rhs_l;
      }

      renormalize_scale(candidate, prob);
      const double candidate_cost = state_cost(candidate, prob, k, delta);
      if (candidate_cost < cost) {
        const bool tiny = (cost - candidate_cost) <= params.relative_decrease_tol * cost;
        state = std::move(candidate);
        cost = candidate_cost;
        result.accepted_costs.push_back(cost);
        lambda = std::max(lambda * params.lambda_down, 1e-12);
        accepted = true;
        if (tiny || cost == 0.0) result.converged = true;
        break;
      }
      lambda *= params.lambda_up;
    }

    if (!accepted) {
      result.converged = true;  // no strictly decreasing step exists
      break;
    }
    if (result.converged) break;
  }

  result.iterations = it;
  result.map = map;
  for (size_t slot = 0; slot < state.cams.size(); ++slot) {
    result.map.poses.at(prob.frames[slot]).pose = state.cams[slot].to_pose();
  }
  for (int j = 0; j < int(state.points.size()); ++j) {
    result.map.landmarks.at(prob.ids[j]) = state.points[j];
  }

  double sq_sum = 0.0;
  long count = 0;
  for (const auto& o : prob.obs) {
    const ReprojResidual r =
        reprojection_residual(state.cams[o.pose], state.points[o.point], o.pixel, k);
    if (!r.valid) continue;
    sq_sum += r.r.squaredNorm();
    ++count;
  }
  result.final_rms_px = count > 0 ? std::sqrt(sq_sum / double(count)) : 0.0;
  return result;
}

namespace {

struct TrackIndex {
  // frame -> (point_id -> pixel), and point_id -> [(frame, pixel)]
  std::map<int, std::map<int, Pixel>> by_frame;
  std::map<int, std::vector<std::pair<int, Pixel>>> by_point;
};

double reproj_error(const Pose& pose, const Vec3& point, const Pixel& px, const Intrinsics& k) {
  const auto proj = project(point, pose, k);
  if (!proj) return std::numeric_limits<double>::infinity();
  return (proj->pixel - px).norm();
}

// Triangulates a track from its two widest-baseline registered views and
// gates on reprojection and chirality in every registered view.
bool try_add_landmark(int point_id, const TrackIndex& index, const ReconstructionMap& map,
                      const Intrinsics& k, const SfmParams& params, Vec3* out) {
  const auto& sightings = index.by_point.at(point_id);
  std::vector<std::pair<int, Pixel>> registered;
  for (const auto& s : sightings) {
    if (map.poses.count(s.first)) registered.push_back(s);
  }
  if (registered.size() < 2) return false;

  double best_baseline = -1.0;
  std::pair<int, int> best{-1, -1};
  for (size_t i = 0; i < registered.size(); ++i) {
    for (size_t j = i + 1; j < registered.size(); ++j) {
      const double baseline = (map.poses.at(registered[i].first).pose.translation -
                               map.poses.at(registered[j].first).pose.translation)
                                  .norm();
      if (baseline > best_baseline) {
        best_baseline = baseline;
        best = {int(i), int(j)};
      }
    }
  }
  if (best_baseline <= 1e-9) return false;

  Vec3 point;
  try {
    point = triangulate(map.poses.at(registered[best.first].first).pose,
                        map.poses.at(registered[best.second].first).pose, k,
                        registered[best.first].second, registered[best.second].second);
  } catch (const DegenerateGeometryError&) {
    return false;
  }

  for (const auto& [frame, px] : registered) {
    const auto proj = project(point, map.poses.at(frame).pose, k);
    if (!proj) return false;
    if ((proj->pixel - px).norm() > params.triangulation_max_reproj_px) return false;
  }
  *out = point;
  return true;
}

void prune_landmarks(ReconstructionMap& map, const Intrinsics& k, double huber_delta) {
  std::set<int> drop;
  for (const auto& [id, point] : map.landmarks) {
    for (const Observation& o : map.observations) {
      if (o.point_id != id) continue;
      const auto it = map.poses.find(o.frame);
      if (it == map.poses.end()) continue;
      const double err = reproj_error(it->second.pose, point, o.pixel, k);
      if (!std::isfinite(err) || err > 3.0 * huber_delta) {
        drop.insert(id);
        break;
      }
    }
  }
  if (drop.empty()) return;
  for (int id : drop) map.landmarks.erase(id);
  std::erase_if(map.observations, [&](const Observation& o) { return drop.count(o.point_id); });
}

}  // namespace

ReconstructionMap run_incremental_sfm(std::span<const Observation> observations,
                                      const Intrinsics& k, const SfmParams& params) {
  TrackIndex index;
  for (const Observation& o : observations) {
    index.by_frame[o.frame][o.point_id] = o.pixel;
    index.by_point[o.point_id].emplace_back(o.frame, o.pixel);
  }
  const int num_frames = int(index.by_frame.size());

  // Initial pair: most shared tracks weighted by a median-displacement
  // baseline proxy.
  double best_score = -1.0;
  std::pair<int, int> init{-1, -1};
  for (auto ia = index.by_frame.begin(); ia != index.by_frame.end(); ++ia) {
    for (auto ib = std::next(ia); ib != index.by_frame.end(); ++ib) {
      std::vector<double> displacements;
      for (const auto& [id, px] : ia->second) {
        const auto it = ib->second.find(id);
        if (it != ib->second.end()) displacements.push_back((px - it->second).norm());
      }
      if (int(displacements.size()) < params.min_shared_for_bootstrap) continue;
      std::nth_element(displacements.begin(), displacements.begin() + displacements.size() / 2,
                       displacements.end());
      const double score =
          double(displacements.size()) * displacements[displacements.size() / 2];
      if (score > best_score) {
        best_score = score;
        init = {ia->first, ib->first};
      }
    }
  }
  if (init.first < 0) {
    throw EmptyReconstructionError("run_incremental_sfm: no frame pair shares enough tracks");
  }

  const auto& frame_a = index.by_frame.at(init.first);
  const auto& frame_b = index.by_frame.at(init.second);
  std::vector<int> shared_ids;
  std::vector<NormalizedPair> normalized;
  std::vector<PixelPair> pixel_pairs;
  for (const auto& [id, px] : frame_a) {
    const auto it = frame_b.find(id);
    if (it == frame_b.end()) continue;
    shared_ids.push_back(id);
    normalized.emplace_back(k.ray(px).head<2>(), k.ray(it->second).head<2>());
    pixel_pairs.emplace_back(px, it->second);
  }

  const Mat3 essential = estimate_essential(normalized);
  const Pose relative = decompose_essential(essential, pixel_pairs, k);

  ReconstructionMap map;
  map.poses.emplace(init.first, PoseEntry{Pose{}, Provenance::Sfm});
  map.poses.emplace(init.second, PoseEntry{relative, Provenance::Sfm});

  for (size_t i = 0; i < shared_ids.size(); ++i) {
    Vec3 point;
    try {
      point = triangulate(Pose{}, relative, k, pixel_pairs[i].first, pixel_pairs[i].second);
    } catch (const DegenerateGeometryError&) {
      continue;
    }
    if (reproj_error(Pose{}, point, pixel_pairs[i].first, k) >
            params.triangulation_max_reproj_px ||
        reproj_error(relative, point, pixel_pairs[i].second, k) >
            params.triangulation_max_reproj_px) {
      continue;
    }
    const auto behind = [&](const Pose& pose) { return !project(point, pose, k).has_value(); };
    if (behind(Pose{}) || behind(relative)) continue;
    map.landmarks.emplace(shared_ids[i], point);
    map.observations.push_back({init.first, shared_ids[i], pixel_pairs[i].first});
    map.observations.push_back({init.second, shared_ids[i], pixel_pairs[i].second});
  }
  if (int(map.landmarks.size()) < params.min_shared_for_bootstrap) {
    throw EmptyReconstructionError("run_incremental_sfm: bootstrap triangulated too few points");
  }

  const BaGauge gauge{init.first, init.second};
  const int ba_stride = std::max(1, (num_frames + 4) / 5);  // ceil(N/5)
  int since_ba = 0;

  const auto grow_landmarks = [&]() {
    for (const auto& [id, sightings] : index.by_point) {
      if (map.landmarks.count(id)) continue;
      Vec3 point;
      if (!try_add_landmark(id, index, map, k, params, &point)) continue;
      map.landmarks.emplace(id, point);
      for (const auto& [frame, px] : sightings) {
        if (map.poses.count(frame)) map.observations.push_back({frame, id, px});
      }
    }
  };
  grow_landmarks();

  std::set<int> failed_since_change;
  while (true) {
    // Next frame: most visible landmarks, lowest index on ties.
    int next = -1;
    int best_visible = 0;
    for (const auto& [frame, points] : index.by_frame) {
      if (map.poses.count(frame) || failed_since_change.count(frame)) continue;
      int visible = 0;
      for (const auto& [id, px] : points) {
        if (map.landmarks.count(id)) ++visible;
      }
      if (visible > best_visible) {
        best_visible = visible;
        next = frame;
      }
    }
    if (next < 0 || best_visible < 6) break;

    std::vector<Correspondence2D3D> corrs;
    for (const auto& [id, px] : index.by_frame.at(next)) {
      const auto it = map.landmarks.find(id);
      if (it != map.landmarks.end()) corrs.push_back({px, it->second, id});
    }
    RansacParams reg = params.ransac;
    reg.seed = derive_seed(params.ransac.seed, derive_seed(std::uint64_t(next), "sfm-register"));
    const auto result = ransac_pnp(corrs, k, reg);
    if (!result) {
      failed_since_change.insert(next);
      continue;
    }

    map.poses.emplace(next, PoseEntry{result->pose, Provenance::Sfm});
    for (const auto& [id, px] : index.by_frame.at(next)) {
      if (map.landmarks.count(id)) map.observations.push_back({next, id, px});
    }
    failed_since_change.clear();
    grow_landmarks();

    if (++since_ba >= ba_stride) {
      BaResult ba = bundle_adjust(map, k, params.ba, gauge);
      map = std::move(ba.map);
      prune_landmarks(map, k, params.ba.huber_delta_px);
      since_ba = 0;
    }
  }

  if (map.poses.size() >= 2 && !map.landmarks.empty()) {
    BaResult ba = bundle_adjust(map, k, params.ba, gauge);
    map = std::move(ba.map);
    prune_landmarks(map, k, params.ba.huber_delta_px);
  }
  return map;
}

std::vector<Observation> observations_from_tracks(std::span<const TrackObservation> tracks) {
  std::vector<Observation> out;
  out.reserve(tracks.size());
  for (const TrackObservation& t : tracks) {
    out.push_back({t.frame, t.point_id, t.pixel});
  }
  return out;
}

}  // namespace hybridloc
