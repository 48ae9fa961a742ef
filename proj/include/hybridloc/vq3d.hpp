#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "hybridloc/geometry.hpp"

// Per-query 3D prediction from 2D detections: pick high-confidence frames,
// lift each detection through its camera pose, aggregate, and express the
// result as a displacement from the query-frame camera center.

namespace hybridloc {

// One 2D sighting of a query object, with the detector's depth estimate.
struct Detection {
  int query_id = 0;
  int frame = 0;
  Pixel center = Pixel::Zero();
  double depth = 0.0;       // meters, > 0
  double confidence = 0.0;  // (0, 1]
};

enum class PredictionStatus { Ok, NoPose, NoDetection };

inline std::string_view to_string(PredictionStatus s) {
  switch (s) {
    case PredictionStatus::Ok: return "OK";
    case PredictionStatus::NoPose: return "NO_POSE";
    case PredictionStatus::NoDetection: return "NO_DETECTION";
  }
  return "NO_DETECTION";
}

inline std::optional<PredictionStatus> prediction_status_from_string(std::string_view s) {
  if (s == "OK") return PredictionStatus::Ok;
  if (s == "NO_POSE") return PredictionStatus::NoPose;
  if (s == "NO_DETECTION") return PredictionStatus::NoDetection;
  return std::nullopt;
}

struct Prediction {
  int query_id = 0;
  PredictionStatus status = PredictionStatus::NoDetection;
  Vec3 object_world = Vec3::Zero();
  Vec3 displacement = Vec3::Zero();  // object_world - query-frame camera center
  int views_used = 0;
};

struct PredictParams {
  double peak_min_prominence = 0.1;
};

// Frames at strict local confidence maxima whose prominence (height above
// the higher of the two flanking minima) reaches min_prominence. A boundary
// element qualifies when it exceeds its single neighbor by min_prominence.
// Falls back to the global maximum (first occurrence) when nothing
// qualifies, so the result is never empty for non-empty input.
std::vector<int> select_peak_frames(std::span<const std::pair<int, double>> confidences,
                                    double min_prominence);

// Eq.-style lifting: depth-scaled camera ray carried to world coordinates.
Vec3 lift_detection(const Detection& det, const Pose& pose, const Intrinsics& k);

// Confidence-weighted mean of lifted points. Throws std::invalid_argument on
// an empty list.
Vec3 aggregate_prediction(std::span<const std::pair<Vec3, double>> lifted);

// Full per-query pipeline. `detections` must all belong to one query.
// Statuses encode the failure modes: NO_POSE when the query frame itself has
// no pose, NO_DETECTION when no detection with a posed frame survives.
Prediction predict_query(std::span<const Detection> detections, const PoseTable& poses,
                         const Intrinsics& k, int query_frame, const PredictParams& params);

}  // namespace hybridloc
