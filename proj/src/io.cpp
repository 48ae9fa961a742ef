#include "hybridloc/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace hybridloc::io {

namespace {

constexpr int kSchemaVersion = 1;

std::string header(const std::string& kind) {
  return "# hybridloc/" + kind + " v" + std::to_string(kSchemaVersion);
}

class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::string& kind) : path_(path) {
    out_.open(path);
    if (!out_) throw IoError("cannot open for writing: " + path.string());
    out_ << header(kind) << "\n";
  }

  ~Writer() { out_.flush(); }

  Writer& word(const std::string& s) {
    out_ << s;
    return *this;
  }
  Writer& field(const std::string& s) {
    out_ << ' ' << s;
    return *this;
  }
  Writer& field(int v) {
    out_ << ' ' << v;
    return *this;
  }
  Writer& field(double v) {
    out_ << ' ' << format_double(v);
    return *this;
  }
  Writer& field(const Vec3& v) { return field(v.x()).field(v.y()).field(v.z()); }
  Writer& field(const Pixel& v) { return field(v.x()).field(v.y()); }
  Writer& field(const Mat3& m) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) field(m(r, c));
    }
    return *this;
  }
  Writer& field(const Intrinsics& k) {
    return field(k.fx).field(k.fy).field(k.cx).field(k.cy).field(k.width).field(k.height);
  }
  void endl() { out_ << '\n'; }

  void fail(const std::string& why) { throw IoError(why + ": " + path_.string()); }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  Reader(const std::filesystem::path& path, const std::string& kind) : path_(path) {
    in_.open(path);
    if (!in_) throw IoError("cannot open for reading: " + path.string());
    std::string first;
    if (!std::getline(in_, first) || first != header(kind)) {
      throw IoError("bad or missing schema header (want '" + header(kind) + "') in " +
                    path.string());
    }
  }

  // Next non-empty, non-comment line as a token stream.
  bool next_line(std::istringstream* line) {
    std::string raw;
    while (std::getline(in_, raw)) {
      if (raw.empty() || raw[0] == '#') continue;
      line->clear();
      line->str(raw);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw IoError(why + " in " + path_.string());
  }

  double num(std::istringstream& line) const {
    double v;
    if (!(line >> v)) fail("expected a number");
    return v;
  }
  int integer(std::istringstream& line) const {
    int v;
    if (!(line >> v)) fail("expected an integer");
    return v;
  }
  std::string word(std::istringstream& line) const {
    std::string s;
    if (!(line >> s)) fail("expected a token");
    return s;
  }
  Vec3 vec3(std::istringstream& line) const {
    const double x = num(line), y = num(line), z = num(line);
    return Vec3(x, y, z);
  }
  Pixel pixel(std::istringstream& line) const {
    const double u = num(line), v = num(line);
    return Pixel(u, v);
  }
  Mat3 mat3(std::istringstream& line) const {
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m(r, c) = num(line);
    }
    return m;
  }
  Intrinsics intrinsics(std::istringstream& line) const {
    Intrinsics k;
    k.fx = num(line);
    k.fy = num(line);
    k.cx = num(line);
    k.cy = num(line);
    k.width = integer(line);
    k.height = integer(line);
    return k;
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << content;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_scene(const std::filesystem::path& path, const SceneTruth& scene) {
  Writer w(path, "scene");
  w.word("intrinsics").field(scene.intrinsics);
  w.endl();
  if (scene.dropped_segment) {
    w.word("segment").field(scene.dropped_segment->first).field(scene.dropped_segment->second);
    w.endl();
  }
  w.word("frames").field(int(scene.trajectory.size()));
  w.endl();
  for (int f = 0; f < int(scene.trajectory.size()); ++f) {
    w.word("pose").field(f).field(scene.trajectory[f].rotation)
        .field(scene.trajectory[f].translation);
    w.endl();
  }
  w.word("points").field(int(scene.world_points.size()));
  w.endl();
  for (const auto& [id, p] : scene.world_points) {
    w.word("point").field(id).field(p);
    w.endl();
  }
  w.word("keypoints").field(int(scene.scan_keypoint_ids.size()));
  w.endl();
  for (int id : scene.scan_keypoint_ids) {
    w.word("keypoint").field(id);
    w.endl();
  }
  w.word("queries").field(int(scene.queries.size()));
  w.endl();
  for (const SceneQuery& q : scene.queries) {
    w.word("query").field(q.query_id).field(q.query_frame).field(q.object);
    w.endl();
  }
}

SceneTruth read_scene(const std::filesystem::path& path) {
  Reader r(path, "scene");
  SceneTruth scene;
  std::istringstream line;
  std::vector<Pose> poses_by_index;
  while (r.next_line(&line)) {
    const std::string tag = r.word(line);
    if (tag == "intrinsics") {
      scene.intrinsics = r.intrinsics(line);
    } else if (tag == "segment") {
      const int a = r.integer(line), b = r.integer(line);
      scene.dropped_segment = {a, b};
    } else if (tag == "frames" || tag == "points" || tag == "keypoints" || tag == "queries") {
      (void)r.integer(line);  // counts are advisory
    } else if (tag == "pose") {
      const int frame = r.integer(line);
      Pose p;
      p.rotation = r.mat3(line);
      p.translation = r.vec3(line);
      if (int(poses_by_index.size()) <= frame) poses_by_index.resize(frame + 1);
      poses_by_index[frame] = p;
    } else if (tag == "point") {
      const int id = r.integer(line);
      scene.world_points[id] = r.vec3(line);
    } else if (tag == "keypoint") {
      scene.scan_keypoint_ids.push_back(r.integer(line));
    } else if (tag == "query") {
      SceneQuery q;
      q.query_id = r.integer(line);
      q.query_frame = r.integer(line);
      q.object = r.vec3(line);
      scene.queries.push_back(q);
    } else {
      r.fail("unknown record '" + tag + "'");
    }
  }
  scene.trajectory = std::move(poses_by_index);
  return scene;
}

void write_tracks(const std::filesystem::path& path, std::span<const TrackObservation> tracks,
                  const Intrinsics& k) {
  Writer w(path, "tracks");
  w.word("intrinsics").field(k);
  w.endl();
  for (const TrackObservation& t : tracks) {
    w.word("obs").field(t.frame).field(t.point_id).field(t.pixel).field(t.depth);
    w.endl();
  }
}

std::pair<std::vector<TrackObservation>, Intrinsics> read_tracks(
    const std::filesystem::path& path) {
  Reader r(path, "tracks");
  std::vector<TrackObservation> tracks;
  Intrinsics k;
  std::istringstream line;
  while (r.next_line(&line)) {
    const std::string tag = r.word(line);
    if (tag == "intrinsics") {
      k = r.intrinsics(line);
    } else if (tag == "obs") {
      TrackObservation t;
      t.frame = r.integer(line);
      t.point_id = r.integer(line);
      t.pixel = r.pixel(line);
      t.depth = r.num(line);
      tracks.push_back(t);
    } else {
      r.fail("unknown record '" + tag + "'");
    }
  }
  return {std::move(tracks), k};
}

void write_matches(const std::filesystem::path& path, std::span<const KeypointMatch> matches,
                   const std::map<int, Vec3>& keypoints, const Intrinsics& k) {
  Writer w(path, "matches");
  w.word("intrinsics").field(k);
  w.endl();
  for (const auto& [id, p] : keypoints) {
    w.word("keypoint").field(id).field(p);
    w.endl();
  }
  for (const KeypointMatch& m : matches) {
    w.word("match").field(m.frame).field(m.point_id).field(m.pixel);
    w.endl();
  }
}

MatchFile read_matches(const std::filesystem::path& path) {
  Reader r(path, "matches");
  MatchFile file;
  std::istringstream line;
  while (r.next_line(&line)) {
    const std::string tag = r.word(line);
    if (tag == "intrinsics") {
      file.intrinsics = r.intrinsics(line);
    } else if (tag == "keypoint") {
      const int id = r.integer(line);
      file.keypoints[id] = r.vec3(line);
    } else if (tag == "match") {
      KeypointMatch m;
      m.frame = r.integer(line);
      m.point_id = r.integer(line);
      m.pixel = r.pixel(line);
      file.matches.push_back(m);
    } else {
      r.fail("unknown record '" + tag + "'");
    }
  }
  return file;
}

void write_detections(const std::filesystem::path& path, std::span<const Detection> detections,
                      const Intrinsics& k) {
  Writer w(path, "detections");
  w.word("intrinsics").field(k);
  w.endl();
  for (const Detection& d : detections) {
    w.word("det").field(d.query_id).field(d.frame).field(d.center).field(d.depth)
        .field(d.confidence);
    w.endl();
  }
}

std::pair<std::vector<Detection>, Intrinsics> read_detections(
    const std::filesystem::path& path) {
  Reader r(path, "detections");
  std::vector<Detection> dets;
  Intrinsics k;
  std::istringstream line;
  while (r.next_line(&line)) {
    const std::string tag = r.word(line);
    if (tag == "intrinsics") {
      k = r.intrinsics(line);
    } else if (tag == "det") {
      Detection d;
      d.query_id = r.integer(line);
      d.frame = r.integer(line);
      d.center = r.pixel(line);
      d.depth = r.num(line);
      d.confidence = r.num(line);
      dets.push_back(d);
    } else {
      r.fail("unknown record '" + tag + "'");
    }
  }
  return {std::move(dets), k};
}

void write_queries(const std::filesystem::path& path,
                   std::span<const QueryGroundTruth> queries) {
  Writer w(path, "queries");
  for (const QueryGroundTruth& q : queries) {
    w.word("query").field(q.query_id).field(q.query_frame).field(q.object)
        .field(q.query_camera_center);
    w.endl();
  }
}

std::vector<QueryGroundTruth> read_queries(const std::filesystem::path& path) {
  Reader r(path, "queries");
  std::vector<QueryGroundTruth> queries;
  std::istringstream line;
  while (r.next_line(&line)) {
    const std::string tag = r.word(line);
    if (tag != "query") r.fail("unknown record '" + tag + "'");
    QueryGroundTruth q;
    q.query_id = r.integer(line);
    q.query_frame = r.integer(line);
    q.object = r.vec3(line);
    q.query_camera_center = r.vec3(line);
    queries.push_back(q);
  }
  return queries;
}

void write_poses(const std::filesystem::path& path, const PoseTable& table) {
  Writer w(path, "poses");
  for (const auto& [frame, entry] : table) {
    w.word("pose").field(frame).field(std::string(to_string(entry.provenance)))
        .field(entry.pose.rotation).field(entry.pose.translation);
    w.endl();
  }
}

PoseTable read_poses(const std::filesystem::path& path) {
  Reader r(path, "poses");
  PoseTable table;
  std::istringstream line;
  while (r.next_line(&line)) {
    const std::string tag = r.word(line);
    if (tag != "pose") r.fail("unknown record '" + tag + "'");
    const int frame = r.integer(line);
    const auto prov = provenance_from_string(r.word(line));
    if (!prov) r.fail("unknown provenance");
    PoseEntry entry;
    entry.provenance = *prov;
    entry.pose.rotation = r.mat3(line);
    entry.pose.translation = r.vec3(line);
    table.emplace(frame, entry);
  }
  return table;
}

void write_landmarks(const std::filesystem::path& path, const std::map<int, Vec3>& landmarks) {
  Writer w(path, "landmarks");
  for (const auto& [id, p] : landmarks) {
    w.word("landmark").field(id).field(p);
    w.endl();
  }
}

std::map<int, Vec3> read_landmarks(const std::filesystem::path& path) {
  Reader r(path, "landmarks");
  std::map<int, Vec3> landmarks;
  std::istringstream line;
  while (r.next_line(&line)) {
    const std::string tag = r.word(line);
    if (tag != "landmark") r.fail("unknown record '" + tag + "'");
    const int id = r.integer(line);
    landmarks[id] = r.vec3(line);
  }
  return landmarks;
}

void write_alignment(const std::filesystem::path& path, const AlignmentReport& report) {
  Writer w(path, "alignment");
  w.word("sim3").field(report.sim3.scale).field(report.sim3.rotation)
      .field(report.sim3.translation);
  w.endl();
  w.word("correspondences_used").field(report.correspondences_used);
  w.endl();
  w.word("rms_center_residual").field(report.rms_center_residual);
  w.endl();
  for (const auto& [frame, res] : report.per_frame_residuals) {
    w.word("residual").field(frame).field(res);
    w.endl();
  }
}

AlignmentReport read_alignment(const std::filesystem::path& path) {
  Reader r(path, "alignment");
  AlignmentReport report;
  std::istringstream line;
  while (r.next_line(&line)) {
    const std::string tag = r.word(line);
    if (tag == "sim3") {
      report.sim3.scale = r.num(line);
      report.sim3.rotation = r.mat3(line);
      report.sim3.translation = r.vec3(line);
    } else if (tag == "correspondences_used") {
      report.correspondences_used = r.integer(line);
    } else if (tag == "rms_center_residual") {
      report.rms_center_residual = r.num(line);
    } else if (tag == "residual") {
      const int frame = r.integer(line);
      report.per_frame_residuals[frame] = r.num(line);
    } else {
      r.fail("unknown record '" + tag + "'");
    }
  }
  return report;
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> preds) {
  Writer w(path, "predictions");
  for (const Prediction& p : preds) {
    w.word("prediction").field(p.query_id).field(std::string(to_string(p.status)))
        .field(p.object_world).field(p.displacement).field(p.views_used);
    w.endl();
  }
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  Reader r(path, "predictions");
  std::vector<Prediction> preds;
  std::istringstream line;
  while (r.next_line(&line)) {
    const std::string tag = r.word(line);
    if (tag != "prediction") r.fail("unknown record '" + tag + "'");
    Prediction p;
    p.query_id = r.integer(line);
    const auto status = prediction_status_from_string(r.word(line));
    if (!status) r.fail("unknown prediction status");
    p.status = *status;
    p.object_world = r.vec3(line);
    p.displacement = r.vec3(line);
    p.views_used = r.integer(line);
    preds.push_back(p);
  }
  return preds;
}

void write_metrics(const std::filesystem::path& path, const MetricsReport& report) {
  Writer w(path, "metrics");
  const auto scalar = [&w](const std::string& name, double v) {
    w.word(name).field(v);
    w.endl();
  };
  scalar("succ_pct", report.succ_pct);
  scalar("succ_star_pct", report.succ_star_pct);
  scalar("mean_l2_m", report.mean_l2_m);
  scalar("mean_angle_rad", report.mean_angle_rad);
  scalar("qwp_pct", report.qwp_pct);
  w.word("total").field(report.total);
  w.endl();
  w.word("with_pose").field(report.with_pose);
  w.endl();
  w.word("with_prediction").field(report.with_prediction);
  w.endl();
  w.word("successes").field(report.successes);
  w.endl();
  w.word("angle_undefined").field(report.angle_undefined);
  w.endl();
}

MetricsReport read_metrics(const std::filesystem::path& path) {
  Reader r(path, "metrics");
  MetricsReport report;
  std::istringstream line;
  while (r.next_line(&line)) {
    const std::string tag = r.word(line);
    if (tag == "succ_pct") report.succ_pct = r.num(line);
    else if (tag == "succ_star_pct") report.succ_star_pct = r.num(line);
    else if (tag == "mean_l2_m") report.mean_l2_m = r.num(line);
    else if (tag == "mean_angle_rad") report.mean_angle_rad = r.num(line);
    else if (tag == "qwp_pct") report.qwp_pct = r.num(line);
    else if (tag == "total") report.total = r.integer(line);
    else if (tag == "with_pose") report.with_pose = r.integer(line);
    else if (tag == "with_prediction") report.with_prediction = r.integer(line);
    else if (tag == "successes") report.successes = r.integer(line);
    else if (tag == "angle_undefined") report.angle_undefined = r.integer(line);
    else r.fail("unknown record '" + tag + "'");
  }
  return report;
}

}  // namespace hybridloc::io
