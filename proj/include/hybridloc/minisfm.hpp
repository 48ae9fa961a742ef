#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "hybridloc/geometry.hpp"
#include "hybridloc/pnp.hpp"

// Incremental structure from motion over 2D tracks: two-view bootstrap from
// the essential matrix, PnP registration against the growing landmark map,
// DLT triangulation, and Levenberg-Marquardt bundle adjustment with a Schur
// complement on the landmarks. Output poses live in an arbitrary similarity
// frame (gauge fixed only up to the bootstrap baseline).

namespace hybridloc {

struct Observation {
  int frame = 0;
  int point_id = 0;
  Pixel pixel = Pixel::Zero();
};

struct ReconstructionMap {
  PoseTable poses;                // provenance SFM
  std::map<int, Vec3> landmarks;  // point_id -> position (SfM frame)
  std::vector<Observation> observations;
};

struct BaParams {
  int max_iterations = 100;
  double initial_lambda = 1e-6;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  double relative_decrease_tol = 1e-12;  // on accepted-cost decrease
  double huber_delta_px = 2.0;
};

// Gauge: the fixed frame's pose is held constant and the distance between the
// two frames' centers is renormalized to its entry value after every step,
// which removes the 7-dof similarity null space without touching the cost.
struct BaGauge {
  int fixed_frame = 0;
  int scale_frame = 1;
};

struct BaResult {
  ReconstructionMap map;
  std::vector<double> accepted_costs;  // entry cost first, strictly decreasing
  int iterations = 0;
  bool converged = false;
  double final_rms_px = 0.0;
};

struct SfmParams {
  RansacParams ransac;  // frame registration (seed is re-derived per frame)
  BaParams ba;
  double triangulation_max_reproj_px = 4.0;
  int min_shared_for_bootstrap = 8;
};

using NormalizedPair = std::pair<Eigen::Vector2d, Eigen::Vector2d>;
using PixelPair = std::pair<Pixel, Pixel>;

// Eight-point estimate from normalized camera coordinates, with the rank-2
// equal-singular-value constraint enforced. Returned with unit Frobenius
// norm; the convention is x2^T E x1 = 0.
Mat3 estimate_essential(std::span<const NormalizedPair> pairs);

// Picks the one (R, t) factorization placing the majority of triangulated
// correspondences in front of both cameras. Returns the second camera's pose
// in the first camera's frame (camera-to-world), baseline normalized to unit
// length.
Pose decompose_essential(const Mat3& e, std::span<const PixelPair> corrs, const Intrinsics& k);

// Linear (DLT) two-view triangulation of the algebraic residual minimizer.
Vec3 triangulate(const Pose& pose_a, const Pose& pose_b, const Intrinsics& k, const Pixel& px_a,
                 const Pixel& px_b);

// Huber-robustified reprojection LM over all non-gauge poses and landmarks.
// Observations whose entry residual is invalid (behind a camera) are
// excluded from the problem; steps are accepted only on strict cost decrease.
BaResult bundle_adjust(const ReconstructionMap& map, const Intrinsics& k, const BaParams& params,
                       const BaGauge& gauge);

// Full incremental pipeline. Frames that never register are absent from the
// output poses. Throws EmptyReconstructionError when no frame pair supports a
// two-view bootstrap.
ReconstructionMap run_incremental_sfm(std::span<const Observation> observations,
                                      const Intrinsics& k, const SfmParams& params);

// Drops the synthetic depth channel.
std::vector<Observation> observations_from_tracks(std::span<const TrackObservation> tracks);

}  // namespace hybridloc
