#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hybridloc/geometry.hpp"
#include "hybridloc/vq3d.hpp"

// The localization metric suite: Succ, Succ*, L2, Angle, QwP over a set of
// evaluated queries.

namespace hybridloc {

struct Thresholds {
  double tau_l2_m = 6.0;
  double tau_angle_rad = 0.5235987755982988;  // pi/6
};

struct QueryGroundTruth {
  int query_id = 0;
  int query_frame = 0;
  Vec3 object = Vec3::Zero();               // ground-truth object center
  Vec3 query_camera_center = Vec3::Zero();  // ground-truth camera center at the query frame
};

struct QueryRecord {
  int query_id = 0;
  bool has_pose = false;
  bool has_prediction = false;
  std::optional<double> l2_error_m;      // present iff predicted
  std::optional<double> angle_error_rad; // absent when predicted but undefined
  bool angle_undefined = false;          // predicted, but a displacement had zero length
  bool success = false;
};

struct MetricsReport {
  double succ_pct = 0.0;
  double succ_star_pct = 0.0;
  double mean_l2_m = 0.0;        // over predicted queries; 0 when none
  double mean_angle_rad = 0.0;   // over defined angles; 0 when none
  double qwp_pct = 0.0;
  int total = 0;
  int with_pose = 0;
  int with_prediction = 0;
  int successes = 0;
  int angle_undefined = 0;
};

double l2_error(const Vec3& pred, const Vec3& gt);

// Angle between displacement vectors. Throws UndefinedAngleError when either
// vector has zero length.
double angle_error(const Vec3& pred_disp, const Vec3& gt_disp);

// Success requires a prediction within both thresholds (inclusive bounds).
// L2 compares object centers, the angle compares displacement vectors.
QueryRecord evaluate_query(const Prediction& pred, const QueryGroundTruth& gt,
                           const Thresholds& thr);

// Aggregates counts into percentages. succ_star is over posed queries,
// qwp over all queries, and succ is evaluated as succ_star * qwp / 100 so
// the metric identity holds bit-exactly (the value equals
// 100 * successes / total in exact arithmetic). Throws on empty input.
MetricsReport aggregate_metrics(std::span<const QueryRecord> records);

// Fixed-width table: Succ% Succ*% L2 Angle QwP%, one row per label.
std::string format_metrics_table(
    std::span<const std::pair<std::string, MetricsReport>> rows);

}  // namespace hybridloc
