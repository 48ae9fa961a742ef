#include "hybridloc/fuse.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace hybridloc {

Sim3 umeyama_sim3(std::span<const Vec3> src, std::span<const Vec3> dst) {
  const int n = int(src.size());
  if (n < 3 || dst.size() != src.size()) {
    throw DegenerateGeometryError("umeyama_sim3: need at least 3 paired points");
  }

  Vec3 mu_src = Vec3::Zero(), mu_dst = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    mu_src += src[i];
    mu_dst += dst[i];
  }
  mu_src /= double(n);
  mu_dst /= double(n);

  Mat3 sigma = Mat3::Zero();  // dst x src cross-covariance
  double var_src = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 a = src[i] - mu_src;
    const Vec3 b = dst[i] - mu_dst;
    sigma += b * a.transpose();
    var_src += a.squaredNorm();
  }
  sigma /= double(n);
  var_src /= double(n);

  // Collinear (or coincident) sources leave the rotation about the source
  // axis unobservable.
  Eigen::SelfAdjointEigenSolver<Mat3> scatter(
      [&] {
        Mat3 s = Mat3::Zero();
        for (int i = 0; i < n; ++i) {
          const Vec3 a = src[i] - mu_src;
          s += a * a.transpose();
        }
        return s;
      }());
  if (scatter.eigenvalues()(1) <= 1e-12 * std::max(scatter.eigenvalues()(2), 1e-300)) {
    throw DegenerateGeometryError("umeyama_sim3: source points are collinear");
  }

  Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 flip = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) {
    flip(2) = -1.0;
  }

  Sim3 out;
  out.rotation = svd.matrixU() * flip.asDiagonal() * svd.matrixV().transpose();
  out.scale = svd.singularValues().dot(flip) / var_src;
  if (!(out.scale > 0.0)) {
    throw DegenerateGeometryError("umeyama_sim3: non-positive scale estimate");
  }
  out.translation = mu_dst - out.scale * (out.rotation * mu_src);
  return out;
}

namespace {

Sim3 fit_centers(const std::vector<int>& frames, const PoseTable& sfm, const PoseTable& pnp) {
  std::vector<Vec3> src, dst;
  src.reserve(frames.size());
  dst.reserve(frames.size());
  for (int f : frames) {
    src.push_back(sfm.at(f).pose.translation);
    dst.push_back(pnp.at(f).pose.translation);
  }
  return umeyama_sim3(src, dst);
}

}  // namespace

std::pair<PoseTable, AlignmentReport> align_sfm_to_scan(const PoseTable& sfm,
                                                        const PoseTable& pnp) {
  std::vector<int> shared;
  for (const auto& [frame, entry] : sfm) {
    if (pnp.count(frame)) shared.push_back(frame);
  }
  if (int(shared.size()) < 3) {
    throw AlignmentInfeasibleError("align_sfm_to_scan: fewer than 3 shared frames");
  }

  Sim3 sim;
  try {
    sim = fit_centers(shared, sfm, pnp);
  } catch (const DegenerateGeometryError& e) {
    throw AlignmentInfeasibleError(std::string("align_sfm_to_scan: ") + e.what());
  }

  const auto residual = [&](const Sim3& s, int frame) {
    return (s.apply(sfm.at(frame).pose.translation) - pnp.at(frame).pose.translation).norm();
  };

  // One robust re-fit: drop shared frames beyond 3x the median residual.
  std::vector<double> res(shared.size());
  for (size_t i = 0; i < shared.size(); ++i) res[i] = residual(sim, shared[i]);
  std::vector<double> sorted = res;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double gate = std::max(3.0 * median, 1e-12);

  std::vector<int> kept;
  for (size_t i = 0; i < shared.size(); ++i) {
    if (res[i] <= gate) kept.push_back(shared[i]);
  }
  if (int(kept.size()) >= 3 && kept.size() < shared.size()) {
    try {
      sim = fit_centers(kept, sfm, pnp);
    } catch (const DegenerateGeometryError&) {
      kept = shared;  // keep the first fit
    }
  } else {
    kept = shared;
  }

  AlignmentReport report;
  report.sim3 = sim;
  report.correspondences_used = int(kept.size());
  double sq = 0.0;
  for (int f : kept) sq += residual(sim, f) * residual(sim, f);
  report.rms_center_residual = std::sqrt(sq / double(kept.size()));
  for (int f : shared) report.per_frame_residuals[f] = residual(sim, f);

  PoseTable aligned;
  for (const auto& [frame, entry] : sfm) {
    aligned.emplace(frame, PoseEntry{apply_sim3(sim, entry.pose), entry.provenance});
  }
  return {std::move(aligned), std::move(report)};
}

namespace {

// Center interpolated linearly in frame index from the nearest covered
// neighbors on both sides, excluding `frame` itself.
std::optional<Vec3> interpolated_center(const PoseTable& table, int frame) {
  auto lower = table.lower_bound(frame);
  if (lower == table.begin()) return std::nullopt;
  const auto prev = std::prev(lower);
  auto next = table.upper_bound(frame);
  if (next == table.end()) return std::nullopt;
  const double span = double(next->first - prev->first);
  const double alpha = span > 0.0 ? double(frame - prev->first) / span : 0.5;
  return (1.0 - alpha) * prev->second.pose.translation +
         alpha * next->second.pose.translation;
}

}  // namespace

PoseTable union_poses(const PoseTable& aligned_sfm, const PoseTable& pnp,
                      const UnionPolicy& policy) {
  if (policy.consistency_gate_m && !(*policy.consistency_gate_m > 0.0)) {
    throw std::invalid_argument("union_poses: consistency gate must be positive");
  }
  const bool prefer_sfm = policy.preference == UnionPreference::PreferSfm;

  PoseTable out;
  for (const auto& [frame, entry] : aligned_sfm) {
    if (!pnp.count(frame)) {
      out.emplace(frame, PoseEntry{entry.pose, Provenance::HybridSfm});
    }
  }
  for (const auto& [frame, entry] : pnp) {
    if (!aligned_sfm.count(frame)) {
      out.emplace(frame, PoseEntry{entry.pose, Provenance::HybridPnp});
    }
  }

  for (const auto& [frame, sfm_entry] : aligned_sfm) {
    const auto pit = pnp.find(frame);
    if (pit == pnp.end()) continue;

    const PoseEntry preferred{prefer_sfm ? sfm_entry.pose : pit->second.pose,
                              prefer_sfm ? Provenance::HybridSfm : Provenance::HybridPnp};
    const PoseEntry other{prefer_sfm ? pit->second.pose : sfm_entry.pose,
                          prefer_sfm ? Provenance::HybridPnp : Provenance::HybridSfm};

    PoseEntry chosen = preferred;
    if (policy.consistency_gate_m) {
      const double disagreement =
          (sfm_entry.pose.translation - pit->second.pose.translation).norm();
      if (disagreement > *policy.consistency_gate_m) {
        const auto expected = interpolated_center(prefer_sfm ? aligned_sfm : pnp, frame);
        if (expected) {
          const double err_pref = (preferred.pose.translation - *expected).norm();
          const double err_other = (other.pose.translation - *expected).norm();
          if (err_other < err_pref) chosen = other;
        }
      }
    }
    out.emplace(frame, chosen);
  }
  return out;
}

}  // namespace hybridloc
