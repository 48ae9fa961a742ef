#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hybridloc/evalkit.hpp"
#include "hybridloc/fuse.hpp"
#include "hybridloc/geometry.hpp"
#include "hybridloc/synthworld.hpp"
#include "hybridloc/vq3d.hpp"

// Human-diffable structured-text formats. Every file starts with a versioned
// schema header line (`# hybridloc/<kind> v1`); floats are serialized with 17
// significant digits so read-back is bit-exact.

namespace hybridloc::io {

std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

void write_scene(const std::filesystem::path& path, const SceneTruth& scene);
SceneTruth read_scene(const std::filesystem::path& path);

void write_tracks(const std::filesystem::path& path, std::span<const TrackObservation> tracks,
                  const Intrinsics& k);
std::pair<std::vector<TrackObservation>, Intrinsics> read_tracks(
    const std::filesystem::path& path);

// The 2D-3D match file carries the scan keypoints' positions so the
// relocalization stage is self-contained.
struct MatchFile {
  Intrinsics intrinsics;
  std::map<int, Vec3> keypoints;
  std::vector<KeypointMatch> matches;  // is_outlier never serialized
};

void write_matches(const std::filesystem::path& path, std::span<const KeypointMatch> matches,
                   const std::map<int, Vec3>& keypoints, const Intrinsics& k);
MatchFile read_matches(const std::filesystem::path& path);

void write_detections(const std::filesystem::path& path, std::span<const Detection> detections,
                      const Intrinsics& k);
std::pair<std::vector<Detection>, Intrinsics> read_detections(const std::filesystem::path& path);

void write_queries(const std::filesystem::path& path, std::span<const QueryGroundTruth> queries);
std::vector<QueryGroundTruth> read_queries(const std::filesystem::path& path);

void write_poses(const std::filesystem::path& path, const PoseTable& table);
PoseTable read_poses(const std::filesystem::path& path);

void write_landmarks(const std::filesystem::path& path, const std::map<int, Vec3>& landmarks);
std::map<int, Vec3> read_landmarks(const std::filesystem::path& path);

void write_alignment(const std::filesystem::path& path, const AlignmentReport& report);
AlignmentReport read_alignment(const std::filesystem::path& path);

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> preds);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

void write_metrics(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_metrics(const std::filesystem::path& path);

}  // namespace hybridloc::io
