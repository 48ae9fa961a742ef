#include "hybridloc/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace hybridloc {

namespace {

constexpr double kCanvas = 720.0;
constexpr double kMargin = 60.0;

struct Bounds {
  double min_x = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  void include(const Vec3& p) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  bool empty() const { return !(min_x <= max_x); }
};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

class SvgCanvas {
 public:
  explicit SvgCanvas(const Bounds& b) : bounds_(b) {
    const double span_x = std::max(bounds_.max_x - bounds_.min_x, 1e-6);
    const double span_y = std::max(bounds_.max_y - bounds_.min_y, 1e-6);
    scale_ = (kCanvas - 2.0 * kMargin) / std::max(span_x, span_y);
  }

  double sx(double x) const { return kMargin + scale_ * (x - bounds_.min_x); }
  // World y grows upward, SVG y grows downward.
  double sy(double y) const { return kCanvas - kMargin - scale_ * (y - bounds_.min_y); }

  void polyline(std::string* out, const std::vector<Vec3>& pts, const std::string& stroke,
                const std::string& dash) const {
    if (pts.size() < 2) return;
    *out += "<polyline fill=\"none\" stroke=\"" + stroke + "\"" +
            (dash.empty() ? "" : " stroke-dasharray=\"" + dash + "\"") +
            " stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
      if (i) *out += ' ';
      *out += fmt(sx(pts[i].x())) + "," + fmt(sy(pts[i].y()));
    }
    *out += "\"/>\n";
  }

  void circle(std::string* out, const Vec3& p, double radius, const std::string& fill) const {
    *out += "<circle cx=\"" + fmt(sx(p.x())) + "\" cy=\"" + fmt(sy(p.y())) + "\" r=\"" +
            fmt(radius) + "\" fill=\"" + fill + "\"/>\n";
  }

  void cross(std::string* out, const Vec3& p, double r, const std::string& stroke) const {
    const double x = sx(p.x()), y = sy(p.y());
    *out += "<path d=\"M " + fmt(x - r) + " " + fmt(y - r) + " L " + fmt(x + r) + " " +
            fmt(y + r) + " M " + fmt(x - r) + " " + fmt(y + r) + " L " + fmt(x + r) + " " +
            fmt(y - r) + "\" stroke=\"" + stroke + "\" stroke-width=\"2\"/>\n";
  }

 private:
  Bounds bounds_;
  double scale_ = 1.0;
};

std::vector<Vec3> centers_of(const PoseTable& table) {
  std::vector<Vec3> out;
  out.reserve(table.size());
  for (const auto& [frame, entry] : table) out.push_back(entry.pose.translation);
  return out;
}

}  // namespace

std::string render_trajectory_svg(const PlotInputs& in) {
  Bounds bounds;
  if (in.gt_trajectory) {
    for (const Pose& p : *in.gt_trajectory) bounds.include(p.translation);
  }
  for (const PoseTable* table : {in.sfm_aligned, in.pnp, in.hybrid}) {
    if (!table) continue;
    for (const auto& [frame, entry] : *table) bounds.include(entry.pose.translation);
  }
  if (in.queries) {
    for (const auto& q : *in.queries) bounds.include(q.object);
  }
  if (in.predictions) {
    for (const auto& p : *in.predictions) {
      if (p.status == PredictionStatus::Ok) bounds.include(p.object_world);
    }
  }
  if (bounds.empty()) bounds.include(Vec3::Zero());

  const SvgCanvas canvas(bounds);
  std::string body;

  struct Layer {
    const char* label;
    const char* color;
    const char* dash;
    std::vector<Vec3> pts;
  };
  std::vector<Layer> layers;
  if (in.gt_trajectory) {
    std::vector<Vec3> pts;
    for (const Pose& p : *in.gt_trajectory) pts.push_back(p.translation);
    layers.push_back({"ground truth", "#555555", "6,4", std::move(pts)});
  }
  if (in.sfm_aligned) layers.push_back({"sfm (aligned)", "#1f77b4", "", centers_of(*in.sfm_aligned)});
  if (in.pnp) layers.push_back({"pnp", "#ff7f0e", "", centers_of(*in.pnp)});
  if (in.hybrid) layers.push_back({"hybrid", "#2ca02c", "", centers_of(*in.hybrid)});

  for (const Layer& layer : layers) {
    canvas.polyline(&body, layer.pts, layer.color, layer.dash);
    for (const Vec3& p : layer.pts) canvas.circle(&body, p, 2.5, layer.color);
  }

  if (in.queries) {
    for (const auto& q : *in.queries) canvas.cross(&body, q.object, 6.0, "#000000");
  }
  if (in.predictions) {
    for (const auto& p : *in.predictions) {
      if (p.status == PredictionStatus::Ok) canvas.circle(&body, p.object_world, 4.0, "#d62728");
    }
  }

  // Legend, including coverage counts so empty tables are self-explanatory.
  double ly = 24.0;
  for (const Layer& layer : layers) {
    body += "<text x=\"16\" y=\"" + fmt(ly) + "\" font-size=\"14\" fill=\"" + layer.color +
            "\">" + layer.label + " (" + std::to_string(layer.pts.size()) + " poses)</text>\n";
    ly += 18.0;
  }
  if (in.queries) {
    body += "<text x=\"16\" y=\"" + fmt(ly) + "\" font-size=\"14\" fill=\"#000000\">x object "
            "ground truth</text>\n";
    ly += 18.0;
  }
  if (in.predictions) {
    body += "<text x=\"16\" y=\"" + fmt(ly) +
            "\" font-size=\"14\" fill=\"#d62728\">o predicted objects</text>\n";
  }

  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kCanvas) + "\" height=\"" +
         fmt(kCanvas) + "\" viewBox=\"0 0 " + fmt(kCanvas) + " " + fmt(kCanvas) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out += body;
  out += "</svg>\n";
  return out;
}

}  // namespace hybridloc
