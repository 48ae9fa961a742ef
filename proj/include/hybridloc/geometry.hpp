#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string_view>

#include "hybridloc/errors.hpp"

// Core projective types and operations. Conventions used everywhere:
//   - Pose is camera-to-world: X_world = R * X_cam + t, so t is the camera
//     center and R's columns are the camera axes expressed in world coords.
//   - Camera frame: x right, y down, z forward (pinhole looks along +z).
//   - Pixels are continuous real coordinates, u right, v down.
//   - World units are meters.

namespace hybridloc {

template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3T = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using PixelT = Eigen::Matrix<Scalar, 2, 1>;

using Vec3 = Vec3T<double>;
using Mat3 = Mat3T<double>;
using Pixel = PixelT<double>;

template <typename Scalar>
bool is_rotation(const Mat3T<Scalar>& r, Scalar tol = Scalar(1e-9)) {
  const Mat3T<Scalar> ortho = r * r.transpose() - Mat3T<Scalar>::Identity();
  return ortho.cwiseAbs().maxCoeff() <= tol && r.determinant() > Scalar(0);
}

// Re-projects an arbitrary matrix onto the nearest rotation (Frobenius sense).
template <typename Scalar>
Mat3T<Scalar> nearest_rotation(const Mat3T<Scalar>& m) {
  Eigen::JacobiSVD<Mat3T<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3T<Scalar> r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < Scalar(0)) {
    Mat3T<Scalar> flip = Mat3T<Scalar>::Identity();
    flip(2, 2) = Scalar(-1);
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

template <typename Scalar>
Mat3T<Scalar> skew(const Vec3T<Scalar>& v) {
  Mat3T<Scalar> m;
  m << Scalar(0), -v.z(), v.y(), v.z(), Scalar(0), -v.x(), -v.y(), v.x(), Scalar(0);
  return m;
}

// Rodrigues exponential, stable near zero.
template <typename Scalar>
Mat3T<Scalar> rotation_exp(const Vec3T<Scalar>& omega) {
  const Scalar theta = omega.norm();
  if (theta < Scalar(1e-12)) {
    return Mat3T<Scalar>::Identity() + skew(omega);
  }
  const Vec3T<Scalar> axis = omega / theta;
  return Eigen::AngleAxis<Scalar>(theta, axis).toRotationMatrix();
}

template <typename Scalar>
struct PoseT {
  Mat3T<Scalar> rotation = Mat3T<Scalar>::Identity();  // camera-to-world
  Vec3T<Scalar> translation = Vec3T<Scalar>::Zero();   // camera center (world)

  Vec3T<Scalar> center() const { return translation; }

  Vec3T<Scalar> to_world(const Vec3T<Scalar>& x_cam) const {
    return rotation * x_cam + translation;
  }
  Vec3T<Scalar> to_camera(const Vec3T<Scalar>& x_world) const {
    return rotation.transpose() * (x_world - translation);
  }

  PoseT inverse() const {
    PoseT out;
    out.rotation = rotation.transpose();
    out.translation = -(rotation.transpose() * translation);
    return out;
  }

  bool valid(Scalar tol = Scalar(1e-9)) const {
    return is_rotation(rotation, tol) && translation.allFinite();
  }
};

using Pose = PoseT<double>;

// Group composition: (a * b)(x) = a(b(x)).
template <typename Scalar>
PoseT<Scalar> operator*(const PoseT<Scalar>& a, const PoseT<Scalar>& b) {
  PoseT<Scalar> out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

template <typename Scalar>
struct IntrinsicsT {
  Scalar fx = Scalar(1);
  Scalar fy = Scalar(1);
  Scalar cx = Scalar(0);
  Scalar cy = Scalar(0);
  int width = 0;
  int height = 0;

  Mat3T<Scalar> matrix() const {
    Mat3T<Scalar> k;
    k << fx, Scalar(0), cx, Scalar(0), fy, cy, Scalar(0), Scalar(0), Scalar(1);
    return k;
  }

  // Normalized camera ray for a pixel (z component 1).
  Vec3T<Scalar> ray(const PixelT<Scalar>& px) const {
    return Vec3T<Scalar>((px.x() - cx) / fx, (px.y() - cy) / fy, Scalar(1));
  }

  bool valid() const {
    return fx > Scalar(0) && fy > Scalar(0) && cx >= Scalar(0) && cy >= Scalar(0) &&
           cx < Scalar(width) && cy < Scalar(height);
  }
};

using Intrinsics = IntrinsicsT<double>;

template <typename Scalar>
bool in_image(const PixelT<Scalar>& px, const IntrinsicsT<Scalar>& k) {
  return px.x() >= Scalar(0) && px.x() < Scalar(k.width) && px.y() >= Scalar(0) &&
         px.y() < Scalar(k.height);
}

template <typename Scalar>
struct ProjectionT {
  PixelT<Scalar> pixel;
  Scalar depth;  // camera-frame z, meters
};

using Projection = ProjectionT<double>;

// Pinhole projection. Absent iff the point is not in front of the camera.
// No image-bounds check here; visibility against the sensor is the caller's
// concern.
template <typename Scalar>
std::optional<ProjectionT<Scalar>> project(const Vec3T<Scalar>& point, const PoseT<Scalar>& pose,
                                           const IntrinsicsT<Scalar>& k) {
  const Vec3T<Scalar> cam = pose.to_camera(point);
  if (!(cam.z() > Scalar(0))) {
    return std::nullopt;
  }
  ProjectionT<Scalar> out;
  out.pixel = PixelT<Scalar>(k.fx * cam.x() / cam.z() + k.cx, k.fy * cam.y() / cam.z() + k.cy);
  out.depth = cam.z();
  return out;
}

// Lifts a pixel with known depth to a world point: scale the camera ray by
// depth, then apply the camera-to-world transform.
template <typename Scalar>
Vec3T<Scalar> backproject(const PixelT<Scalar>& px, Scalar depth, const IntrinsicsT<Scalar>& k,
                          const PoseT<Scalar>& pose) {
  if (!(depth > Scalar(0))) {
    throw std::invalid_argument("backproject: depth must be positive");
  }
  return pose.to_world(depth * k.ray(px));
}

// Similarity transform: x -> scale * R * x + t.
template <typename Scalar>
struct Sim3T {
  Scalar scale = Scalar(1);
  Mat3T<Scalar> rotation = Mat3T<Scalar>::Identity();
  Vec3T<Scalar> translation = Vec3T<Scalar>::Zero();

  Vec3T<Scalar> apply(const Vec3T<Scalar>& p) const {
    return scale * (rotation * p) + translation;
  }

  Sim3T inverse() const {
    Sim3T out;
    out.scale = Scalar(1) / scale;
    out.rotation = rotation.transpose();
    out.translation = -(out.scale * (out.rotation * translation));
    return out;
  }

  bool valid(Scalar tol = Scalar(1e-9)) const {
    return scale > Scalar(0) && is_rotation(rotation, tol) && translation.allFinite();
  }
};

using Sim3 = Sim3T<double>;

// Carries a camera-to-world pose across a similarity: camera centers map as
// points, rotations compose (scale does not touch orientation).
template <typename Scalar>
PoseT<Scalar> apply_sim3(const Sim3T<Scalar>& s, const PoseT<Scalar>& p) {
  PoseT<Scalar> out;
  out.rotation = s.rotation * p.rotation;
  out.translation = s.apply(p.translation);
  return out;
}

// Geodesic distance between rotations, in [0, pi]. Small angles go through
// the Frobenius/asin form: |a-b|_F^2 = 8 sin^2(theta/2) for rotations, which
// stays well-conditioned where acos(trace) loses half the mantissa.
template <typename Scalar>
Scalar rotation_angle(const Mat3T<Scalar>& a, const Mat3T<Scalar>& b) {
  const Scalar half_sin =
      std::sqrt(std::min((a - b).squaredNorm() / Scalar(8), Scalar(1)));
  if (half_sin < Scalar(0.7)) {
    return Scalar(2) * std::asin(half_sin);
  }
  const Scalar c = ((a.transpose() * b).trace() - Scalar(1)) / Scalar(2);
  return std::acos(std::clamp(c, Scalar(-1), Scalar(1)));
}

// Where a pose estimate came from. HYBRID-* marks entries that went through
// the pose-set union.
enum class Provenance { Sfm, Pnp, HybridSfm, HybridPnp };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Sfm: return "SFM";
    case Provenance::Pnp: return "PNP";
    case Provenance::HybridSfm: return "HYBRID-SFM";
    case Provenance::HybridPnp: return "HYBRID-PNP";
  }
  return "SFM";
}

inline std::optional<Provenance> provenance_from_string(std::string_view s) {
  if (s == "SFM") return Provenance::Sfm;
  if (s == "PNP") return Provenance::Pnp;
  if (s == "HYBRID-SFM") return Provenance::HybridSfm;
  if (s == "HYBRID-PNP") return Provenance::HybridPnp;
  return std::nullopt;
}

struct PoseEntry {
  Pose pose;
  Provenance provenance = Provenance::Sfm;
};

// Partial map frame index -> pose. Frames whose estimation failed are simply
// absent; downstream metrics account for the holes.
using PoseTable = std::map<int, PoseEntry>;

}  // namespace hybridloc
