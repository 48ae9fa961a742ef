#pragma once

#include <Eigen/Core>

#include "hybridloc/geometry.hpp"

// Reprojection residuals and analytic Jacobians shared by pose refinement and
// bundle adjustment. Cameras are parameterized world-to-camera and updated by
// left-multiplicative se(3) increments:
//
//   x_cam' = exp([omega]x) * (R X + t) + v
//
// so R <- exp([omega]x) R and t <- exp([omega]x) t + v compose the update
// exactly.

namespace hybridloc {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat26 = Eigen::Matrix<double, 2, 6>;
using Mat23 = Eigen::Matrix<double, 2, 3>;

struct CameraParam {
  Mat3 rotation = Mat3::Identity();  // R world-to-camera
  Vec3 translation = Vec3::Zero();   // t world-to-camera

  static CameraParam from_pose(const Pose& p) {
    const Pose inv = p.inverse();
    return {inv.rotation, inv.translation};
  }

  Pose to_pose() const {
    Pose wc;
    wc.rotation = rotation;
    wc.translation = translation;
    return wc.inverse();
  }

  Vec3 transform(const Vec3& x_world) const { return rotation * x_world + translation; }

  CameraParam updated(const Vec6& delta) const {
    const Mat3 dr = rotation_exp(Vec3(delta.head<3>()));
    CameraParam out;
    out.rotation = nearest_rotation<double>(dr * rotation);
    out.translation = dr * translation + delta.tail<3>();
    return out;
  }
};

struct ReprojResidual {
  Eigen::Vector2d r = Eigen::Vector2d::Zero();  // predicted - observed, px
  Mat26 j_camera = Mat26::Zero();               // d r / d (omega, v)
  Mat23 j_point = Mat23::Zero();                // d r / d X
  double depth = 0.0;                           // camera-frame z
  bool valid = false;                           // false iff point not in front
};

inline ReprojResidual reprojection_residual(const CameraParam& cam, const Vec3& point,
                                            const Pixel& observed, const Intrinsics& k) {
  ReprojResidual out;
  const Vec3 pc = cam.transform(point);
  out.depth = pc.z();
  if (!(pc.z() > 1e-9)) {
    return out;
  }
  const double iz = 1.0 / pc.z();
  const double iz2 = iz * iz;
  out.r.x() = k.fx * pc.x() * iz + k.cx - observed.x();
  out.r.y() = k.fy * pc.y() * iz + k.cy - observed.y();

  Mat23 d_pixel_d_pc;
  d_pixel_d_pc << k.fx * iz, 0.0, -k.fx * pc.x() * iz2,
                  0.0, k.fy * iz, -k.fy * pc.y() * iz2;

  out.j_camera.leftCols<3>() = d_pixel_d_pc * (-skew(pc));
  out.j_camera.rightCols<3>() = d_pixel_d_pc;
  out.j_point = d_pixel_d_pc * cam.rotation;
  out.valid = true;
  return out;
}

// Huber loss on the residual euclidean norm e: quadratic inside delta,
// linear outside. weight() is the IRLS factor rho'(e)/e.
inline double huber_cost(double e, double delta) {
  return e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
}

inline double huber_weight(double e, double delta) {
  return e <= delta ? 1.0 : delta / e;
}

}  // namespace hybridloc
