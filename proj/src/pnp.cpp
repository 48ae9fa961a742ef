#include "hybridloc/pnp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "hybridloc/reprojection.hpp"
#include "hybridloc/rng.hpp"

namespace hybridloc {

namespace {

void validate(const RansacParams& p) {
  if (p.max_iterations < 1) throw std::invalid_argument("ransac: max_iterations must be >= 1");
  if (!(p.inlier_threshold_px > 0.0)) throw std::invalid_argument("ransac: threshold must be > 0");
  if (p.min_inliers < 6) throw std::invalid_argument("ransac: min_inliers must be >= 6");
  if (!(p.confidence > 0.0 && p.confidence < 1.0)) {
    throw std::invalid_argument("ransac: confidence must be in (0,1)");
  }
}

double reprojection_error(const Pose& pose, const Correspondence2D3D& c, const Intrinsics& k) {
  const auto proj = project(c.point, pose, k);
  if (!proj) return std::numeric_limits<double>::infinity();
  return (proj->pixel - c.pixel).norm();
}

double total_cost(const CameraParam& cam, std::span<const Correspondence2D3D> corrs,
                  const Intrinsics& k) {
  double cost = 0.0;
  for (const auto& c : corrs) {
    const ReprojResidual res = reprojection_residual(cam, c.point, c.pixel, k);
    if (!res.valid) return std::numeric_limits<double>::infinity();
    cost += res.r.squaredNorm();
  }
  return cost;
}

}  // namespace

Pose solve_pnp_dlt(std::span<const Correspondence2D3D> corrs, const Intrinsics& k) {
  const int n = int(corrs.size());
  if (n < 6) throw std::invalid_argument("solve_pnp_dlt: need at least 6 correspondences");

  // Center and scale the 3D points for conditioning.
  Vec3 centroid = Vec3::Zero();
  for (const auto& c : corrs) centroid += c.point;
  centroid /= double(n);
  double spread = 0.0;
  for (const auto& c : corrs) spread += (c.point - centroid).norm();
  spread /= double(n);
  const double scale = spread > 1e-12 ? std::sqrt(3.0) / spread : 1.0;

  Eigen::MatrixXd a(2 * n, 12);
  for (int i = 0; i < n; ++i) {
    const Vec3 p = (corrs[i].point - centroid) * scale;
    const double u = (corrs[i].pixel.x() - k.cx) / k.fx;
    const double v = (corrs[i].pixel.y() - k.cy) / k.fy;
    a.row(2 * i) << p.x(), p.y(), p.z(), 1, 0, 0, 0, 0, -u * p.x(), -u * p.y(), -u * p.z(), -u;
    a.row(2 * i + 1) << 0, 0, 0, 0, p.x(), p.y(), p.z(), 1, -v * p.x(), -v * p.y(), -v * p.z(), -v;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  // A generic configuration leaves exactly one null direction; a second one
  // means the solution is not unique.
  if (sv(10) <= 1e-9 * sv(0)) {
    throw DegenerateGeometryError("solve_pnp_dlt: rank-deficient design matrix");
  }

  const Eigen::VectorXd m = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> proj;
  proj << m(0), m(1), m(2), m(3), m(4), m(5), m(6), m(7), m(8), m(9), m(10), m(11);

  // Undo the point normalization: X_norm = scale * (X - centroid).
  Eigen::Matrix4d denorm = Eigen::Matrix4d::Identity();
  denorm.topLeftCorner<3, 3>() *= scale;
  denorm.topRightCorner<3, 1>() = -scale * centroid;
  proj = proj * denorm;

  // Fix the overall sign so most points land in front of the camera.
  int positive = 0;
  for (const auto& c : corrs) {
    const double w = proj.row(2).head<3>().dot(c.point) + proj(2, 3);
    if (w > 0.0) ++positive;
  }
  if (2 * positive < n) proj = -proj;

  const double row_norm = proj.row(2).head<3>().norm();
  if (row_norm < 1e-12) {
    throw DegenerateGeometryError("solve_pnp_dlt: singular projection estimate");
  }
  proj /= row_norm;

  const Mat3 r_wc = nearest_rotation<double>(Mat3(proj.leftCols<3>()));
  const Vec3 t_wc = proj.col(3);

  Pose out;
  out.rotation = r_wc.transpose();
  out.translation = -(r_wc.transpose() * t_wc);
  return out;
}

RefineResult refine_pose(const Pose& initial, std::span<const Correspondence2D3D> inliers,
                         const Intrinsics& k, int max_iterations) {
  if (inliers.size() < 6) throw std::invalid_argument("refine_pose: need at least 6 inliers");

  CameraParam cam = CameraParam::from_pose(initial);
  double cost = total_cost(cam, inliers, k);

  RefineResult result;
  result.initial_cost = cost;
  double lambda = 1e-8;
  bool converged = false;
  int it = 0;

  for (; it < max_iterations && !converged; ++it) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Vec6 g = Vec6::Zero();
    for (const auto& c : inliers) {
      const ReprojResidual res = reprojection_residual(cam, c.point, c.pixel, k);
      if (!res.valid) continue;
      h += res.j_camera.transpose() * res.j_camera;
      g += res.j_camera.transpose() * res.r;
    }
    if (g.cwiseAbs().maxCoeff() < 1e-14) {
      converged = true;
      break;
    }

    bool accepted = false;
    while (lambda < 1e16) {
      Eigen::Matrix<double, 6, 6> damped = h;
      damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
      const Vec6 delta = damped.ldlt().solve(-g);
      const CameraParam candidate = cam.updated(delta);
      const double candidate_cost = total_cost(candidate, inliers, k);
      if (candidate_cost < cost) {
        if (cost - candidate_cost <= 1e-14 * cost || delta.cwiseAbs().maxCoeff() < 1e-14) {
          converged = true;
        }
        cam = candidate;
        cost = candidate_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      converged = cost == 0.0 || lambda >= 1e16;
      break;
    }
  }

  result.pose = cam.to_pose();
  result.converged = converged;
  result.final_cost = cost;
  result.iterations = it;
  return result;
}

std::optional<RansacPnpResult> ransac_pnp(std::span<const Correspondence2D3D> corrs,
                                          const Intrinsics& k, const RansacParams& params) {
  validate(params);
  const int n = int(corrs.size());
  if (n < 6) return std::nullopt;

  // All samples come from the seeded stream before any scoring happens.
  Rng rng(derive_seed(params.seed, "ransac-pnp"));
  std::vector<std::array<int, 6>> samples(params.max_iterations);
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (auto& sample : samples) {
    for (int j = 0; j < 6; ++j) {
      std::swap(pool[j], pool[rng.uniform_int(j, n - 1)]);
      sample[j] = pool[j];
    }
  }

  int best_count = 0;
  double best_error = std::numeric_limits<double>::infinity();
  std::optional<Pose> best_pose;

  for (int it = 0; it < params.max_iterations; ++it) {
    std::array<Correspondence2D3D, 6> minimal;
    for (int j = 0; j < 6; ++j) minimal[j] = corrs[samples[it][j]];

    Pose hypothesis;
    try {
      hypothesis = solve_pnp_dlt(minimal, k);
    } catch (const DegenerateGeometryError&) {
      continue;
    } catch (const std::invalid_argument&) {
      continue;
    }

    int count = 0;
    double error_sum = 0.0;
    for (const auto& c : corrs) {
      const double e = reprojection_error(hypothesis, c, k);
      if (e < params.inlier_threshold_px) {
        ++count;
        error_sum += e;
      }
    }
    if (count > best_count || (count == best_count && error_sum < best_error)) {
      best_count = count;
      best_error = error_sum;
      best_pose = hypothesis;
    }

    // Standard adaptive exit from the consensus bound (1 - w^s)^N.
    if (best_count > 0) {
      const double w = double(best_count) / double(n);
      const double p_outlier_sample = 1.0 - std::pow(w, 6);
      if (p_outlier_sample < 1e-12) break;
      const double needed = std::log(1.0 - params.confidence) / std::log(p_outlier_sample);
      if (double(it + 1) >= needed) break;
    }
  }

  if (!best_pose || best_count < params.min_inliers) return std::nullopt;

  std::vector<Correspondence2D3D> consensus;
  consensus.reserve(best_count);
  for (const auto& c : corrs) {
    if (reprojection_error(*best_pose, c, k) < params.inlier_threshold_px) {
      consensus.push_back(c);
    }
  }

  const Pose refined = refine_pose(*best_pose, consensus, k).pose;

  RansacPnpResult result;
  result.pose = refined;
  for (int i = 0; i < n; ++i) {
    if (reprojection_error(refined, corrs[i], k) < params.inlier_threshold_px) {
      result.inlier_indices.push_back(i);
    }
  }
  if (int(result.inlier_indices.size()) < params.min_inliers) return std::nullopt;
  return result;
}

PoseTable relocalize_frames(const std::map<int, std::vector<Correspondence2D3D>>& matches_by_frame,
                            const Intrinsics& k, const RansacParams& params) {
  validate(params);
  PoseTable table;
  for (const auto& [frame, corrs] : matches_by_frame) {
    RansacParams frame_params = params;
    frame_params.seed = derive_seed(params.seed, std::uint64_t(frame));
    const auto result = ransac_pnp(corrs, k, frame_params);
    if (result) {
      table.emplace(frame, PoseEntry{result->pose, Provenance::Pnp});
    }
  }
  return table;
}

std::map<int, std::vector<Correspondence2D3D>> correspondences_from_matches(
    std::span<const KeypointMatch> matches, const std::map<int, Vec3>& keypoint_positions) {
  std::map<int, std::vector<Correspondence2D3D>> by_frame;
  for (const KeypointMatch& m : matches) {
    const auto it = keypoint_positions.find(m.point_id);
    if (it == keypoint_positions.end()) continue;
    by_frame[m.frame].push_back({m.pixel, it->second, m.point_id});
  }
  return by_frame;
}

}  // namespace hybridloc
