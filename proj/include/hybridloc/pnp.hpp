#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hybridloc/geometry.hpp"
#include "hybridloc/synthworld.hpp"

// Camera relocalization from 2D-3D matches: direct linear transform PnP,
// damped Gauss-Newton refinement, and a seeded-deterministic RANSAC wrapper
// applied independently per frame.

namespace hybridloc {

struct Correspondence2D3D {
  Pixel pixel = Pixel::Zero();
  Vec3 point = Vec3::Zero();  // scan/world frame
  int point_id = 0;
};

struct RansacParams {
  int max_iterations = 1000;
  double inlier_threshold_px = 2.0;
  int min_inliers = 12;
  double confidence = 0.99;  // early-exit consensus bound
  std::uint64_t seed = 0;
};

// DLT over >= 6 correspondences; the linear estimate is factored into a
// proper rotation (nearest-rotation projection) and returned camera-to-world.
// Throws std::invalid_argument below 6 points and DegenerateGeometryError on
// a rank-deficient design matrix (collinear/otherwise degenerate geometry).
Pose solve_pnp_dlt(std::span<const Correspondence2D3D> corrs, const Intrinsics& k);

struct RefineResult {
  Pose pose;
  bool converged = false;  // false: iteration cap hit (best iterate returned)
  double initial_cost = 0.0;  // summed squared reprojection error, px^2
  double final_cost = 0.0;
  int iterations = 0;
};

// Damped Gauss-Newton on summed squared reprojection error over a 6-dof local
// pose parameterization. Steps that would raise the cost are rejected, so
// final_cost <= initial_cost always holds.
RefineResult refine_pose(const Pose& initial, std::span<const Correspondence2D3D> inliers,
                         const Intrinsics& k, int max_iterations = 50);

struct RansacPnpResult {
  Pose pose;
  std::vector<int> inlier_indices;  // indices into the input span
};

// Hypothesize-and-verify over 6-point samples, scored by inlier count with
// summed-error then hypothesis-index tie-breaking. All hypothesis samples are
// drawn from the seeded stream up front, so evaluation order cannot change
// the result. Absent when the best consensus is below min_inliers.
std::optional<RansacPnpResult> ransac_pnp(std::span<const Correspondence2D3D> corrs,
                                          const Intrinsics& k, const RansacParams& params);

// Per-frame relocalization; frames whose RANSAC fails are simply absent.
// Provenance of every entry is PNP.
PoseTable relocalize_frames(const std::map<int, std::vector<Correspondence2D3D>>& matches_by_frame,
                            const Intrinsics& k, const RansacParams& params);

// Joins rendered scan matches against keypoint positions, grouped by frame.
std::map<int, std::vector<Correspondence2D3D>> correspondences_from_matches(
    std::span<const KeypointMatch> matches, const std::map<int, Vec3>& keypoint_positions);

}  // namespace hybridloc
