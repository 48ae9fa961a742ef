#pragma once

#include <string>
#include <vector>

#include "hybridloc/evalkit.hpp"
#include "hybridloc/geometry.hpp"
#include "hybridloc/synthworld.hpp"
#include "hybridloc/vq3d.hpp"

// Top-down (world x/y) SVG rendering of trajectories and object positions.
// Output is deterministic byte-for-byte for identical inputs.

namespace hybridloc {

struct PlotInputs {
  const std::vector<Pose>* gt_trajectory = nullptr;
  const PoseTable* sfm_aligned = nullptr;
  const PoseTable* pnp = nullptr;
  const PoseTable* hybrid = nullptr;
  const std::vector<QueryGroundTruth>* queries = nullptr;
  const std::vector<Prediction>* predictions = nullptr;
};

std::string render_trajectory_svg(const PlotInputs& inputs);

}  // namespace hybridloc
