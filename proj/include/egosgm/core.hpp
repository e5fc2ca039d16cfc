// Shared domain types for the temporal stereo pipeline.
//
// Coordinate convention: x grows rightward, y downward, origin at the
// top-left pixel center. Disparity d = x_left - x_right >= 0.
#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace egosgm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition of an operation was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Row-major dense 2D grid.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw ContractViolation("grid dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(int w, int h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  bool operator==(const Grid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

/// 8-bit grayscale image, at least 2x2.
class GrayImage : public Grid<std::uint8_t> {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0)
      : Grid<std::uint8_t>(checked(width, height), height, fill) {}

 private:
  static int checked(int width, int height) {
    if (width < 2 || height < 2) {
      throw ContractViolation("gray image must be at least 2x2, got " +
                              std::to_string(width) + "x" + std::to_string(height));
    }
    return width;
  }
};

struct StereoRig {
  double f = 0.0;   // focal length, pixels
  double b = 0.0;   // baseline, meters
  double cx = 0.0;  // principal point, pixels
  double cy = 0.0;
  int width = 0;
  int height = 0;
  int d_max = 0;  // maximum disparity, pixels

  void validate() const {
    if (!(f > 0.0) || !(b > 0.0)) throw ContractViolation("rig requires f > 0 and b > 0");
    if (width < 2 || height < 2) throw ContractViolation("rig image must be at least 2x2");
    if (d_max < 1 || d_max >= width) {
      throw ContractViolation("rig requires 1 <= d_max < width, got d_max=" +
                              std::to_string(d_max));
    }
  }

  bool operator==(const StereoRig&) const = default;
};

/// Real-valued disparities with an explicit validity flag per pixel.
/// Invalid pixels hold 0.0 so that equal maps compare bit-identical.
class DisparityMap {
 public:
  DisparityMap() = default;
  DisparityMap(int width, int height)
      : values_(width, height, 0.0), valid_(width, height, 0) {}

  int width() const { return values_.width(); }
  int height() const { return values_.height(); }
  std::size_t size() const { return values_.size(); }
  bool contains(int x, int y) const { return values_.contains(x, y); }

  bool valid(int x, int y) const { return valid_(x, y) != 0; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }
  double operator()(int x, int y) const { return values_(x, y); }
  double operator[](std::size_t i) const { return values_[i]; }

  void set(int x, int y, double d) { set(values_.index(x, y), d); }
  void set(std::size_t i, double d) {
    values_[i] = d;
    valid_[i] = 1;
  }
  void invalidate(int x, int y) { invalidate(values_.index(x, y)); }
  void invalidate(std::size_t i) {
    values_[i] = 0.0;
    valid_[i] = 0;
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid_.data()) n += v;
    return n;
  }

  const Grid<double>& values() const { return values_; }
  const Mask& validity() const { return valid_; }

  bool operator==(const DisparityMap&) const = default;

 private:
  Grid<double> values_;
  Mask valid_;
};

/// Per-pixel disparity variance (pixels^2). Validity comes from the paired
/// DisparityMap; entries at invalid pixels are kept at 0.
class VarianceMap : public Grid<double> {
 public:
  VarianceMap() = default;
  VarianceMap(int width, int height, double fill = 0.0) : Grid<double>(width, height, fill) {}
};

/// Disparity map with its paired variance map.
struct Estimate {
  DisparityMap disparity;
  VarianceMap variance;

  Estimate() = default;
  Estimate(int width, int height) : disparity(width, height), variance(width, height) {}
  Estimate(DisparityMap d, VarianceMap p) : disparity(std::move(d)), variance(std::move(p)) {}

  int width() const { return disparity.width(); }
  int height() const { return disparity.height(); }

  void set(std::size_t i, double d, double p) {
    disparity.set(i, d);
    variance[i] = p;
  }
  void invalidate(std::size_t i) {
    disparity.invalidate(i);
    variance[i] = 0.0;
  }

  bool operator==(const Estimate&) const = default;
};

struct FilterState {
  Estimate left;
  Estimate right;
  int frame = 0;

  bool operator==(const FilterState&) const = default;
};

inline DisparityMap make_invalid_map(int width, int height) {
  if (width < 2 || height < 2) {
    throw ContractViolation("disparity map must be at least 2x2, got " + std::to_string(width) +
                            "x" + std::to_string(height));
  }
  return DisparityMap(width, height);
}

inline FilterState make_empty_state(const StereoRig& rig, int frame = 0) {
  FilterState s;
  s.left = Estimate(make_invalid_map(rig.width, rig.height), VarianceMap(rig.width, rig.height));
  s.right = Estimate(make_invalid_map(rig.width, rig.height), VarianceMap(rig.width, rig.height));
  s.frame = frame;
  return s;
}

/// Throws unless every valid pixel lies in (0, d_max].
inline void check_disparity_range(const DisparityMap& map, double d_max) {
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map.valid(i) && !(map[i] > 0.0 && map[i] <= d_max)) {
      throw ContractViolation("valid disparity " + std::to_string(map[i]) +
                              " outside (0, " + std::to_string(d_max) + "]");
    }
  }
}

/// Throws unless the disparity and variance maps agree on shape and the
/// valid set carries finite nonnegative variances.
inline void check_pair(const Estimate& e) {
  if (!e.variance.same_shape(e.disparity.width(), e.disparity.height())) {
    throw ContractViolation("disparity/variance shape mismatch");
  }
  for (std::size_t i = 0; i < e.disparity.size(); ++i) {
    if (e.disparity.valid(i)) {
      if (!std::isfinite(e.variance[i]) || e.variance[i] < 0.0) {
        throw ContractViolation("valid pixel carries invalid variance");
      }
    } else if (e.variance[i] != 0.0 || e.disparity[i] != 0.0) {
      throw ContractViolation("invalid pixel carries a value");
    }
  }
}

/// Rigid transform; maps frame-(k-1) camera coordinates into frame-k
/// coordinates when used as ego-motion.
class RigidMotion {
 public:
  static constexpr double kTolerance = 1e-9;

  RigidMotion() : m_(Eigen::Matrix4d::Identity()) {}

  explicit RigidMotion(const Eigen::Matrix4d& m, double tolerance = kTolerance) : m_(m) {
    const Eigen::Vector4d last = m.row(3).transpose();
    if (last != Eigen::Vector4d(0, 0, 0, 1)) {
      throw ContractViolation("rigid motion last row must be (0,0,0,1)");
    }
    const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
    const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= tolerance) || !(std::abs(r.determinant() - 1.0) <= tolerance)) {
      throw ContractViolation("rigid motion rotation block is not a proper rotation");
    }
  }

  RigidMotion(const Eigen::Matrix3d& r, const Eigen::Vector3d& t)
      : RigidMotion(assemble(r, t)) {}

  static RigidMotion identity() { return {}; }
  static RigidMotion translation(double x, double y, double z) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m(0, 3) = x;
    m(1, 3) = y;
    m(2, 3) = z;
    return RigidMotion(m);
  }

  const Eigen::Matrix4d& matrix() const { return m_; }
  Eigen::Matrix3d rotation() const { return m_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return m_.topRightCorner<3, 1>(); }

  RigidMotion inverse() const {
    const Eigen::Matrix3d rt = rotation().transpose();
    return RigidMotion(assemble(rt, -rt * translation()), 1e-6);
  }

  friend RigidMotion operator*(const RigidMotion& a, const RigidMotion& b) {
    // Products of valid motions drift slowly; accept a looser bound here.
    return RigidMotion(a.m_ * b.m_, 1e-6);
  }

  bool operator==(const RigidMotion& o) const { return m_ == o.m_; }

 private:
  static Eigen::Matrix4d assemble(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = r;
    m.topRightCorner<3, 1>() = t;
    return m;
  }

  Eigen::Matrix4d m_;
};

}  // namespace egosgm
