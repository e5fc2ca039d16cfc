// Rigid motion expressed as a projective map on disparity space.
//
// A camera-frame point M = (X, Y, Z, 1) and its disparity-space image
// w = (x, y, d, 1) with x = fX/Z, y = fY/Z, d = fb/Z are related by the
// projective map G, w ~ G M. A rigid motion T acting on M therefore acts on
// w as H = G T G^-1. All x/y coordinates here are relative to the principal
// point; use to_centered/from_centered at the image boundary.
#pragma once

#include "egosgm/core.hpp"

#include <Eigen/Core>
#include <Eigen/LU>

#include <cmath>
#include <string>

namespace egosgm {

class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Invertible 4x4 map on homogeneous disparity-space coordinates.
class ProjectiveMap4 {
 public:
  ProjectiveMap4() : m_(Eigen::Matrix4d::Identity()) {}
  explicit ProjectiveMap4(const Eigen::Matrix4d& m) : m_(m) {
    if (!(std::abs(m.determinant()) > 1e-12) || !m.allFinite()) {
      throw GeometryError("projective map is singular");
    }
  }

  const Eigen::Matrix4d& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  ProjectiveMap4 inverse() const { return ProjectiveMap4(m_.inverse()); }

  friend ProjectiveMap4 operator*(const ProjectiveMap4& a, const ProjectiveMap4& b) {
    return ProjectiveMap4(a.m_ * b.m_);
  }

 private:
  Eigen::Matrix4d m_;
};

struct DisparityPoint {
  double x = 0.0;
  double y = 0.0;
  double d = 0.0;

  bool operator==(const DisparityPoint&) const = default;
};

inline DisparityPoint to_centered(const StereoRig& rig, double x, double y, double d) {
  return {x - rig.cx, y - rig.cy, d};
}

inline DisparityPoint from_centered(const StereoRig& rig, const DisparityPoint& w) {
  return {w.x + rig.cx, w.y + rig.cy, w.d};
}

/// Maps homogeneous camera coordinates to homogeneous disparity space.
inline ProjectiveMap4 gamma(const StereoRig& rig) {
  rig.validate();
  const double f = rig.f, fb = rig.f * rig.b;
  Eigen::Matrix4d g;
  g << f, 0, 0, 0,
       0, f, 0, 0,
       0, 0, 0, fb,
       0, 0, 1, 0;
  return ProjectiveMap4(g);
}

/// Closed-form inverse of gamma(rig).
inline ProjectiveMap4 inverse_gamma(const StereoRig& rig) {
  rig.validate();
  const double f = rig.f, fb = rig.f * rig.b;
  Eigen::Matrix4d g;
  g << 1.0 / f, 0, 0, 0,
       0, 1.0 / f, 0, 0,
       0, 0, 0, 1,
       0, 0, 1.0 / fb, 0;
  return ProjectiveMap4(g);
}

/// H = G T G^-1, expanded symbolically. The expansion is exact for the
/// identity motion (H == I bit-for-bit), which a numeric triple product is not.
inline ProjectiveMap4 disparity_homography(const StereoRig& rig, const RigidMotion& motion) {
  rig.validate();
  const Eigen::Matrix3d r = motion.rotation();
  const Eigen::Vector3d t = motion.translation();
  const double f = rig.f, b = rig.b, fb = rig.f * rig.b;
  Eigen::Matrix4d h;
  h << r(0, 0),     r(0, 1),     t.x() / b,  f * r(0, 2),
       r(1, 0),     r(1, 1),     t.y() / b,  f * r(1, 2),
       0,           0,           1,          0,
       r(2, 0) / f, r(2, 1) / f, t.z() / fb, r(2, 2);
  try {
    return ProjectiveMap4(h);
  } catch (const GeometryError&) {
    throw GeometryError("internal error: disparity homography is singular");
  }
}

/// Applies H to a centered disparity-space point and rescales by the fourth
/// homogeneous component. The returned d may be <= 0 for points that end up
/// level with or behind the camera; callers reject those.
inline DisparityPoint warp_point(const ProjectiveMap4& h, const DisparityPoint& w) {
  const Eigen::Vector4d in(w.x, w.y, w.d, 1.0);
  const Eigen::Vector4d out = h.matrix() * in;
  if (std::abs(out[3]) < 1e-12) {
    throw GeometryError("point at infinity: fourth homogeneous component is zero");
  }
  return {out[0] / out[3], out[1] / out[3], out[2] / out[3]};
}

/// Motion of the right camera given the left-camera motion. Right-camera
/// coordinates are M_R = B M_L with B a translation by -b along X.
inline RigidMotion right_camera_motion(const StereoRig& rig, const RigidMotion& left) {
  const RigidMotion to_right = RigidMotion::translation(-rig.b, 0.0, 0.0);
  const RigidMotion to_left = RigidMotion::translation(rig.b, 0.0, 0.0);
  return to_right * left * to_left;
}

}  // namespace egosgm
