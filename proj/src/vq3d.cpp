#include "hybridloc/vq3d.hpp"

#include <algorithm>
#include <map>

namespace hybridloc {

std::vector<int> select_peak_frames(std::span<const std::pair<int, double>> confidences,
                                    double min_prominence) {
  if (confidences.empty()) throw std::invalid_argument("select_peak_frames: empty input");
  const int n = int(confidences.size());
  const auto conf = [&](int i) { return confidences[i].second; };

  std::vector<int> peaks;
  if (n == 1) {
    peaks.push_back(confidences[0].first);
    return peaks;
  }

  // Boundary elements: qualify by exceeding the single neighbor.
  if (conf(0) - conf(1) >= min_prominence) peaks.push_back(confidences[0].first);

  for (int i = 1; i + 1 < n; ++i) {
    if (!(conf(i) > conf(i - 1) && conf(i) > conf(i + 1))) continue;
    // Flanking minima: walk down while strictly decreasing.
    int l = i;
    while (l > 0 && conf(l - 1) < conf(l)) --l;
    int r = i;
    while (r + 1 < n && conf(r + 1) < conf(r)) ++r;
    const double prominence = conf(i) - std::max(conf(l), conf(r));
    if (prominence >= min_prominence) peaks.push_back(confidences[i].first);
  }

  if (conf(n - 1) - conf(n - 2) >= min_prominence) peaks.push_back(confidences[n - 1].first);

  if (peaks.empty()) {
    // Fallback: global maximum, first occurrence.
    int best = 0;
    for (int i = 1; i < n; ++i) {
      if (conf(i) > conf(best)) best = i;
    }
    peaks.push_back(confidences[best].first);
  }
  return peaks;
}

Vec3 lift_detection(const Detection& det, const Pose& pose, const Intrinsics& k) {
  return backproject(det.center, det.depth, k, pose);
}

Vec3 aggregate_prediction(std::span<const std::pair<Vec3, double>> lifted) {
  if (lifted.empty()) throw std::invalid_argument("aggregate_prediction: no detections");
  Vec3 weighted = Vec3::Zero();
  double total = 0.0;
  for (const auto& [point, confidence] : lifted) {
    weighted += confidence * point;
    total += confidence;
  }
  if (!(total > 0.0)) throw std::invalid_argument("aggregate_prediction: zero total confidence");
  return weighted / total;
}

Prediction predict_query(std::span<const Detection> detections, const PoseTable& poses,
                         const Intrinsics& k, int query_frame, const PredictParams& params) {
  Prediction out;
  out.query_id = detections.empty() ? 0 : detections.front().query_id;

  const auto query_pose = poses.find(query_frame);
  if (query_pose == poses.end()) {
    out.status = PredictionStatus::NoPose;
    return out;
  }

  // One detection per frame (highest confidence wins), ordered by frame.
  std::map<int, Detection> by_frame;
  for (const Detection& d : detections) {
    const auto it = by_frame.find(d.frame);
    if (it == by_frame.end() || d.confidence > it->second.confidence) by_frame[d.frame] = d;
  }
  if (by_frame.empty()) {
    out.status = PredictionStatus::NoDetection;
    return out;
  }

  std::vector<std::pair<int, double>> profile;
  profile.reserve(by_frame.size());
  for (const auto& [frame, det] : by_frame) profile.emplace_back(frame, det.confidence);

  std::vector<int> frames = select_peak_frames(profile, params.peak_min_prominence);
  std::erase_if(frames, [&](int f) { return poses.count(f) == 0; });

  if (frames.empty()) {
    // Every peak lost its pose: fall back to the best-confidence frame that
    // still has one, so a prediction exists whenever detection and pose
    // coexist anywhere.
    int best = -1;
    for (const auto& [frame, det] : by_frame) {
      if (!poses.count(frame)) continue;
      if (best < 0 || det.confidence > by_frame.at(best).confidence) best = frame;
    }
    if (best >= 0) frames.push_back(best);
  }
  if (frames.empty()) {
    out.status = PredictionStatus::NoDetection;
    return out;
  }

  std::vector<std::pair<Vec3, double>> lifted;
  lifted.reserve(frames.size());
  for (int f : frames) {
    const Detection& det = by_frame.at(f);
    lifted.emplace_back(lift_detection(det, poses.at(f).pose, k), det.confidence);
  }

  out.status = PredictionStatus::Ok;
  out.object_world = aggregate_prediction(lifted);
  out.displacement = out.object_world - query_pose->second.pose.translation;
  out.views_used = int(lifted.size());
  if (!detections.empty()) out.query_id = detections.front().query_id;
  return out;
}

}  // namespace hybridloc
