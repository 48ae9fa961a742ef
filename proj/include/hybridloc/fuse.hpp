#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>

#include "hybridloc/geometry.hpp"

// Registration of SfM poses into the scan frame via shared-frame similarity
// alignment, followed by the pose-set union that gives the hybrid table its
// extra coverage.

namespace hybridloc {

struct AlignmentReport {
  Sim3 sim3;
  int correspondences_used = 0;       // shared frames in the final fit
  double rms_center_residual = 0.0;   // meters, over the frames used
  std::map<int, double> per_frame_residuals;  // every shared frame
};

enum class UnionPreference { PreferSfm, PreferPnp };

inline std::string_view to_string(UnionPreference p) {
  return p == UnionPreference::PreferSfm ? "prefer-sfm" : "prefer-pnp";
}

struct UnionPolicy {
  UnionPreference preference = UnionPreference::PreferSfm;
  // When set: if the two sources disagree by more than this on a frame both
  // cover, the entry whose center interpolates better between its own
  // neighbors wins.
  std::optional<double> consistency_gate_m;
};

// Closed-form least-squares Sim(3) from paired points (centered
// cross-covariance SVD with reflection guard, scale from the variance
// ratio). Throws DegenerateGeometryError below 3 pairs or for collinear
// sources.
Sim3 umeyama_sim3(std::span<const Vec3> src, std::span<const Vec3> dst);

// Fits src->dst over the shared frames' camera centers with one robust
// re-fit (frames beyond 3x the median residual are dropped once), then
// carries every SfM pose into the scan frame. Provenance stays SFM.
std::pair<PoseTable, AlignmentReport> align_sfm_to_scan(const PoseTable& sfm,
                                                        const PoseTable& pnp);

// Domain union of two scan-frame tables. Frames covered by one source copy
// that entry; frames covered by both follow the policy. Output provenance is
// HYBRID-SFM or HYBRID-PNP by chosen source.
PoseTable union_poses(const PoseTable& aligned_sfm, const PoseTable& pnp,
                      const UnionPolicy& policy);

}  // namespace hybridloc
