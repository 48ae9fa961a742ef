#include "hybridloc/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace hybridloc {

double l2_error(const Vec3& pred, const Vec3& gt) { return (pred - gt).norm(); }

double angle_error(const Vec3& pred_disp, const Vec3& gt_disp) {
  const double np = pred_disp.norm();
  const double ng = gt_disp.norm();
  if (np <= 0.0 || ng <= 0.0) {
    throw UndefinedAngleError("angle_error: zero-length displacement");
  }
  const double c = pred_disp.dot(gt_disp) / (np * ng);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

QueryRecord evaluate_query(const Prediction& pred, const QueryGroundTruth& gt,
                           const Thresholds& thr) {
  if (pred.query_id != gt.query_id) {
    throw std::invalid_argument("evaluate_query: mismatched query ids");
  }
  if (!(thr.tau_l2_m > 0.0 && thr.tau_angle_rad > 0.0)) {
    throw std::invalid_argument("evaluate_query: thresholds must be positive");
  }

  QueryRecord rec;
  rec.query_id = gt.query_id;
  rec.has_pose = pred.status != PredictionStatus::NoPose;
  rec.has_prediction = pred.status == PredictionStatus::Ok;
  if (!rec.has_prediction) return rec;

  rec.l2_error_m = l2_error(pred.object_world, gt.object);
  try {
    rec.angle_error_rad = angle_error(pred.displacement, gt.object - gt.query_camera_center);
  } catch (const UndefinedAngleError&) {
    rec.angle_undefined = true;
  }
  rec.success = *rec.l2_error_m <= thr.tau_l2_m && rec.angle_error_rad.has_value() &&
                *rec.angle_error_rad <= thr.tau_angle_rad;
  return rec;
}

MetricsReport aggregate_metrics(std::span<const QueryRecord> records) {
  if (records.empty()) throw std::invalid_argument("aggregate_metrics: no records");

  MetricsReport r;
  r.total = int(records.size());
  double l2_sum = 0.0, angle_sum = 0.0;
  int l2_count = 0, angle_count = 0;
  for (const QueryRecord& rec : records) {
    if (rec.has_pose) ++r.with_pose;
    if (rec.has_prediction) ++r.with_prediction;
    if (rec.success) ++r.successes;
    if (rec.angle_undefined) ++r.angle_undefined;
    if (rec.l2_error_m) {
      l2_sum += *rec.l2_error_m;
      ++l2_count;
    }
    if (rec.angle_error_rad) {
      angle_sum += *rec.angle_error_rad;
      ++angle_count;
    }
  }

  r.qwp_pct = 100.0 * double(r.with_pose) / double(r.total);
  r.succ_star_pct = r.with_pose > 0 ? 100.0 * double(r.successes) / double(r.with_pose) : 0.0;
  // Evaluated in this order so succ == succ_star * qwp / 100 holds bit-exactly.
  r.succ_pct = r.succ_star_pct * r.qwp_pct / 100.0;
  r.mean_l2_m = l2_count > 0 ? l2_sum / double(l2_count) : 0.0;
  r.mean_angle_rad = angle_count > 0 ? angle_sum / double(angle_count) : 0.0;
  return r;
}

std::string format_metrics_table(
    std::span<const std::pair<std::string, MetricsReport>> rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %8s %8s %8s %8s %8s\n", "method", "Succ%",
                "Succ*%", "L2", "Angle", "QwP%");
  out += line;
  for (const auto& [label, r] : rows) {
    std::snprintf(line, sizeof(line), "%-12s %8.2f %8.2f %8.2f %8.2f %8.2f\n", label.c_str(),
                  r.succ_pct, r.succ_star_pct, r.mean_l2_m, r.mean_angle_rad, r.qwp_pct);
    out += line;
  }
  return out;
}

}  // namespace hybridloc
