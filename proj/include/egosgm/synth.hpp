// Deterministic ray-cast stereo scenes with exact ground truth.
//
// The world frame is the frame of the first left camera (x right, y down,
// z forward). Poses are world-from-camera; the left camera of pose P sits at
// P.translation() and the right camera at P * (b, 0, 0).
#pragma once

#include "egosgm/core.hpp"
#include "egosgm/kv_file.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace egosgm {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Textured plane z = const in world coordinates, bounded in x and y.
struct TexturedPlane {
  double z = 10.0;
  double x_min = -kInf, x_max = kInf;
  double y_min = -kInf, y_max = kInf;
  double contrast = 1.0;
};

struct TexturedBox {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Ones();
  double contrast = 1.0;
};

struct SceneSpec {
  StereoRig rig;
  std::uint64_t seed = 1;
  double texture_cell = 0.05;  // lattice spacing of the value noise, meters
  std::uint8_t background = 0;
  std::vector<TexturedPlane> planes;
  std::vector<TexturedBox> boxes;

  void validate() const {
    rig.validate();
    if (!(texture_cell > 0.0)) throw ContractViolation("texture cell must be > 0");
    for (const auto& p : planes) {
      if (!(p.z > rig.b)) throw ContractViolation("plane depth must exceed the baseline");
    }
    for (const auto& bx : boxes) {
      if (!(bx.lo.array() < bx.hi.array()).all()) throw ContractViolation("box lo must be < hi");
    }
  }
};

/// Straight dolly with optional constant yaw rate.
struct TrajectorySpec {
  int frames = 10;
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d step = Eigen::Vector3d(0.0, 0.0, 0.5);  // world translation per frame
  double yaw_step = 0.0;                                  // radians per frame, about y
};

struct Trajectory {
  std::vector<RigidMotion> poses;  // world-from-camera

  static Trajectory from_spec(const TrajectorySpec& spec) {
    Trajectory t;
    for (int k = 0; k < spec.frames; ++k) {
      const Eigen::Matrix3d r =
          Eigen::AngleAxisd(spec.yaw_step * k, Eigen::Vector3d::UnitY()).toRotationMatrix();
      t.poses.emplace_back(r, spec.start + spec.step * static_cast<double>(k));
    }
    return t;
  }

  std::size_t size() const { return poses.size(); }

  /// Motion taking frame-(k-1) camera coordinates into frame-k coordinates;
  /// identity for k = 0.
  RigidMotion relative(std::size_t k) const {
    if (k == 0) return RigidMotion::identity();
    return poses[k].inverse() * poses[k - 1];
  }
};

struct StereoFrame {
  GrayImage left;
  GrayImage right;
  DisparityMap gt_left;
  DisparityMap gt_right;
};

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double lattice(std::uint64_t seed, std::uint64_t prim, std::int64_t i, std::int64_t j) {
  std::uint64_t h = splitmix(seed ^ splitmix(prim));
  h = splitmix(h ^ static_cast<std::uint64_t>(i));
  h = splitmix(h ^ static_cast<std::uint64_t>(j));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Bilinear value noise in [0, 1).
inline double value_noise(std::uint64_t seed, std::uint64_t prim, double u, double v,
                          double cell) {
  const double gu = u / cell, gv = v / cell;
  const double fi = std::floor(gu), fj = std::floor(gv);
  const double fu = gu - fi, fv = gv - fj;
  const auto i = static_cast<std::int64_t>(fi), j = static_cast<std::int64_t>(fj);
  const double a = lattice(seed, prim, i, j), b = lattice(seed, prim, i + 1, j);
  const double c = lattice(seed, prim, i, j + 1), d = lattice(seed, prim, i + 1, j + 1);
  return (a * (1 - fu) + b * fu) * (1 - fv) + (c * (1 - fu) + d * fu) * fv;
}

/// Band-limited value noise mapped to an 8-bit intensity. Octave k has cell
/// texture_cell * 2^k; octaves whose cell spans fewer than ~2 pixels at the
/// hit (`footprint`, meters per pixel on the surface) are faded out so the
/// two views never see aliased, inconsistent texture.
inline std::uint8_t texture(const SceneSpec& scene, std::uint64_t prim, double u, double v,
                            double contrast, double footprint) {
  constexpr int kOctaves = 8;
  double sum = 0.0, norm = 0.0;
  for (int k = 0; k < kOctaves; ++k) {
    const double cell = scene.texture_cell * std::ldexp(1.0, k);
    const double w = std::clamp((cell / footprint - 2.0) / 2.0, 0.0, 1.0);
    if (w == 0.0) continue;
    const std::uint64_t octave_prim = splitmix(prim * 31 + static_cast<std::uint64_t>(k));
    sum += w * (value_noise(scene.seed, octave_prim, u, v, cell) - 0.5);
    norm += w * w;
  }
  const double n = norm > 0.0 ? sum / std::sqrt(norm) : 0.0;
  const double i = 128.0 + contrast * n * 400.0;
  return static_cast<std::uint8_t>(std::clamp(std::round(i), 0.0, 255.0));
}

struct Hit {
  double t = kInf;  // camera depth (ray direction has unit camera-z)
  std::uint8_t intensity = 0;
};

/// `dir` must have unit camera-z so that t is camera depth.
inline Hit cast_ray(const SceneSpec& scene, const Eigen::Vector3d& origin,
                    const Eigen::Vector3d& dir) {
  const double pixel = 1.0 / scene.rig.f;  // meters per pixel at unit depth
  const auto footprint = [&](double t, double cos_normal) {
    return t * pixel * dir.norm() / std::max(std::abs(cos_normal), 1e-3);
  };
  constexpr double kEps = 1e-9;
  Hit best;
  for (std::size_t p = 0; p < scene.planes.size(); ++p) {
    const auto& pl = scene.planes[p];
    if (std::abs(dir.z()) < 1e-15) continue;
    const double t = (pl.z - origin.z()) / dir.z();
    if (!(t > kEps) || !(t < best.t)) continue;
    const Eigen::Vector3d q = origin + t * dir;
    if (q.x() < pl.x_min || q.x() > pl.x_max || q.y() < pl.y_min || q.y() > pl.y_max) continue;
    best.t = t;
    best.intensity =
        texture(scene, p, q.x(), q.y(), pl.contrast, footprint(t, dir.z() / dir.norm()));
  }
  for (std::size_t n = 0; n < scene.boxes.size(); ++n) {
    const auto& bx = scene.boxes[n];
    double t_near = -kInf, t_far = kInf;
    int axis = -1;
    int side = 0;
    bool miss = false;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(dir[a]) < 1e-15) {
        if (origin[a] < bx.lo[a] || origin[a] > bx.hi[a]) miss = true;
        continue;
      }
      double t1 = (bx.lo[a] - origin[a]) / dir[a];
      double t2 = (bx.hi[a] - origin[a]) / dir[a];
      int s = 0;
      if (t1 > t2) {
        std::swap(t1, t2);
        s = 1;
      }
      if (t1 > t_near) {
        t_near = t1;
        axis = a;
        side = s;
      }
      t_far = std::min(t_far, t2);
    }
    if (miss || axis < 0 || !(t_near <= t_far) || !(t_near > kEps) || !(t_near < best.t)) continue;
    const Eigen::Vector3d q = origin + t_near * dir;
    const int ua = axis == 0 ? 1 : 0, va = axis == 2 ? 1 : 2;
    const std::uint64_t prim = 1000 + 6 * n + 2 * static_cast<std::uint64_t>(axis) + side;
    best.t = t_near;
    best.intensity = texture(scene, prim, q[ua], q[va], bx.contrast,
                             footprint(t_near, dir[axis] / dir.norm()));
  }
  return best;
}

inline void render_view(const SceneSpec& scene, const Eigen::Matrix3d& r,
                        const Eigen::Vector3d& origin, GrayImage& image, DisparityMap& gt) {
  const auto& rig = scene.rig;
  const double fb = rig.f * rig.b;
  for (int y = 0; y < rig.height; ++y) {
    for (int x = 0; x < rig.width; ++x) {
      const Eigen::Vector3d dir_cam((x - rig.cx) / rig.f, (y - rig.cy) / rig.f, 1.0);
      const Hit hit = cast_ray(scene, origin, r * dir_cam);
      if (!std::isfinite(hit.t)) {
        image(x, y) = scene.background;
        continue;
      }
      image(x, y) = hit.intensity;
      const double d = fb / hit.t;
      if (d > 0.0 && d <= rig.d_max) gt.set(x, y, d);
    }
  }
}

}  // namespace detail

/// Renders both views at world-from-camera `pose`. Pixels with no hit keep
/// the background intensity and an invalid ground truth; so do hits whose
/// disparity exceeds d_max.
inline StereoFrame render_frame(const SceneSpec& scene, const RigidMotion& pose) {
  scene.validate();
  const auto& rig = scene.rig;
  StereoFrame f{GrayImage(rig.width, rig.height), GrayImage(rig.width, rig.height),
                make_invalid_map(rig.width, rig.height), make_invalid_map(rig.width, rig.height)};
  const Eigen::Matrix3d r = pose.rotation();
  const Eigen::Vector3d c_left = pose.translation();
  const Eigen::Vector3d c_right = c_left + r * Eigen::Vector3d(rig.b, 0.0, 0.0);
  detail::render_view(scene, r, c_left, f.left, f.gt_left);
  detail::render_view(scene, r, c_right, f.right, f.gt_right);
  return f;
}

/// Left-multiplies a random small rotation and adds translation noise.
inline RigidMotion perturb_motion(const RigidMotion& m, double sigma_rot, double sigma_trans,
                                  std::mt19937_64& rng) {
  if (sigma_rot == 0.0 && sigma_trans == 0.0) return m;
  Eigen::Matrix3d r = m.rotation();
  Eigen::Vector3d t = m.translation();
  if (sigma_rot > 0.0) {
    std::normal_distribution<double> n(0.0, sigma_rot);
    const Eigen::Vector3d w(n(rng), n(rng), n(rng));
    const double angle = w.norm();
    if (angle > 0.0) r = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix() * r;
  }
  if (sigma_trans > 0.0) {
    std::normal_distribution<double> n(0.0, sigma_trans);
    t += Eigen::Vector3d(n(rng), n(rng), n(rng));
  }
  return RigidMotion(r, t);
}

inline void add_image_noise(GrayImage& image, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> n(0.0, sigma);
  for (auto& px : image.data()) {
    px = static_cast<std::uint8_t>(std::clamp(std::round(px + n(rng)), 0.0, 255.0));
  }
}

struct SequenceFrame {
  StereoFrame frame;
  RigidMotion pose;   // world-from-camera, exact
  RigidMotion exact;  // frame k-1 -> frame k, exact
  RigidMotion noisy;  // perturbed copy of `exact`
};

struct NoiseSpec {
  double sigma_rot = 0.0;    // radians
  double sigma_trans = 0.0;  // meters
  double image_sigma = 0.0;  // intensity levels
  std::uint64_t seed = 1;
};

inline std::vector<SequenceFrame> make_sequence(const SceneSpec& scene, const Trajectory& traj,
                                                const NoiseSpec& noise) {
  std::mt19937_64 rng(noise.seed);
  std::vector<SequenceFrame> out;
  out.reserve(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    SequenceFrame sf{render_frame(scene, traj.poses[k]), traj.poses[k], traj.relative(k), {}};
    sf.noisy = k == 0 ? sf.exact : perturb_motion(sf.exact, noise.sigma_rot, noise.sigma_trans, rng);
    add_image_noise(sf.frame.left, noise.image_sigma, rng);
    add_image_noise(sf.frame.right, noise.image_sigma, rng);
    out.push_back(std::move(sf));
  }
  return out;
}

inline std::vector<SequenceFrame> make_sequence(const SceneSpec& scene, const Trajectory& traj,
                                                double sigma_rot, double sigma_trans,
                                                std::uint64_t seed = 1) {
  return make_sequence(scene, traj, NoiseSpec{sigma_rot, sigma_trans, 0.0, seed});
}

/// 256x128 rig used by the desk-scale sequences: d = 256 / Z.
inline StereoRig default_synthetic_rig() {
  return StereoRig{256.0, 1.0, 127.5, 63.5, 256, 128, 63};
}

/// Floor, back wall and a handful of boxes placed from `seed`; sized for a
/// forward dolly of up to 5 m from the origin.
inline SceneSpec random_dolly_scene(std::uint64_t seed, const StereoRig& rig) {
  SceneSpec s;
  s.rig = rig;
  s.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  s.planes.push_back({24.0, -40.0, 40.0, -20.0, 20.0, 0.9});
  s.boxes.push_back({Eigen::Vector3d(-40.0, 1.5, -10.0), Eigen::Vector3d(40.0, 2.0, 24.0), 0.8});
  const int count = 4 + static_cast<int>(uni(rng) * 3.0);
  for (int i = 0; i < count; ++i) {
    const double cx = -4.0 + 8.0 * uni(rng);
    const double cz = 10.0 + 8.0 * uni(rng);
    const double sx = 0.8 + 1.7 * uni(rng), sy = 0.8 + 1.5 * uni(rng), sz = 0.5 + 1.5 * uni(rng);
    const double bottom = 1.5;
    const double contrast = 0.35 + 0.65 * uni(rng);
    s.boxes.push_back({Eigen::Vector3d(cx - sx / 2, bottom - sy, cz - sz / 2),
                       Eigen::Vector3d(cx + sx / 2, bottom, cz + sz / 2), contrast});
  }
  return s;
}

/// Scene, trajectory and noise as stored in a sequence spec file.
struct SequenceSpec {
  SceneSpec scene;
  TrajectorySpec trajectory;
  NoiseSpec noise;
};

namespace detail {

inline std::string join(std::initializer_list<double> values) {
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (double v : values) {
    if (!first) os << ' ';
    first = false;
    if (std::isinf(v)) {
      os << (v > 0 ? "inf" : "-inf");
    } else {
      os << v;
    }
  }
  return os.str();
}

inline std::vector<double> expect_count(const KeyValueFile& kv, const std::string& key,
                                        const std::string& text, std::size_t lo, std::size_t hi) {
  auto v = parse_doubles(text, kv.source() + " (" + key + ")");
  if (v.size() < lo || v.size() > hi) {
    throw ParseError(kv.source() + ": '" + key + "' expects " + std::to_string(lo) +
                     (lo == hi ? "" : "-" + std::to_string(hi)) + " numbers, got " +
                     std::to_string(v.size()));
  }
  return v;
}

}  // namespace detail

inline const std::set<std::string>& sequence_spec_keys() {
  static const std::set<std::string> keys{
      "rig.f", "rig.b", "rig.cx", "rig.cy", "rig.width", "rig.height", "rig.d_max",
      "seed", "texture.cell", "background", "plane", "box", "random_scene",
      "trajectory.frames", "trajectory.start", "trajectory.step", "trajectory.yaw_step_deg",
      "noise.sigma_rot_deg", "noise.sigma_trans", "noise.image_sigma", "noise.seed"};
  return keys;
}

/// Reads a sequence spec. `random_scene = true` appends random_dolly_scene
/// primitives for the given seed to any explicit planes and boxes.
///
///   plane = z [x_min x_max y_min y_max [contrast]]
///   box   = x0 y0 z0 x1 y1 z1 [contrast]
inline SequenceSpec parse_sequence_spec(const KeyValueFile& kv) {
  kv.require_known(sequence_spec_keys());
  SequenceSpec spec;
  const StereoRig def = default_synthetic_rig();
  auto& rig = spec.scene.rig;
  rig.f = kv.get_double("rig.f", def.f);
  rig.b = kv.get_double("rig.b", def.b);
  rig.cx = kv.get_double("rig.cx", def.cx);
  rig.cy = kv.get_double("rig.cy", def.cy);
  rig.width = static_cast<int>(kv.get_int("rig.width", def.width));
  rig.height = static_cast<int>(kv.get_int("rig.height", def.height));
  rig.d_max = static_cast<int>(kv.get_int("rig.d_max", def.d_max));
  spec.scene.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  spec.scene.texture_cell = kv.get_double("texture.cell", 0.05);
  spec.scene.background = static_cast<std::uint8_t>(kv.get_int("background", 0));

  if (kv.get_bool("random_scene", false)) {
    const SceneSpec r = random_dolly_scene(spec.scene.seed, rig);
    spec.scene.planes = r.planes;
    spec.scene.boxes = r.boxes;
  }
  for (const auto& text : kv.get_all("plane")) {
    const auto v = detail::expect_count(kv, "plane", text, 1, 6);
    TexturedPlane p;
    p.z = v[0];
    if (v.size() >= 5) {
      p.x_min = v[1];
      p.x_max = v[2];
      p.y_min = v[3];
      p.y_max = v[4];
    } else if (v.size() != 1) {
      throw ParseError(kv.source() + ": 'plane' expects 1, 5 or 6 numbers");
    }
    if (v.size() == 6) p.contrast = v[5];
    spec.scene.planes.push_back(p);
  }
  for (const auto& text : kv.get_all("box")) {
    const auto v = detail::expect_count(kv, "box", text, 6, 7);
    TexturedBox b{Eigen::Vector3d(v[0], v[1], v[2]), Eigen::Vector3d(v[3], v[4], v[5]),
                  v.size() == 7 ? v[6] : 1.0};
    spec.scene.boxes.push_back(b);
  }

  auto& tr = spec.trajectory;
  tr.frames = static_cast<int>(kv.get_int("trajectory.frames", tr.frames));
  if (tr.frames < 1) throw ParseError(kv.source() + ": trajectory.frames must be >= 1");
  if (auto s = kv.get("trajectory.start")) {
    const auto v = detail::expect_count(kv, "trajectory.start", *s, 3, 3);
    tr.start = Eigen::Vector3d(v[0], v[1], v[2]);
  }
  if (auto s = kv.get("trajectory.step")) {
    const auto v = detail::expect_count(kv, "trajectory.step", *s, 3, 3);
    tr.step = Eigen::Vector3d(v[0], v[1], v[2]);
  }
  tr.yaw_step = kv.get_double("trajectory.yaw_step_deg", 0.0) * std::numbers::pi / 180.0;

  spec.noise.sigma_rot = kv.get_double("noise.sigma_rot_deg", 0.0) * std::numbers::pi / 180.0;
  spec.noise.sigma_trans = kv.get_double("noise.sigma_trans", 0.0);
  spec.noise.image_sigma = kv.get_double("noise.image_sigma", 0.0);
  spec.noise.seed = static_cast<std::uint64_t>(kv.get_int("noise.seed", 1));
  spec.scene.validate();
  return spec;
}

inline KeyValueFile to_key_values(const SequenceSpec& spec) {
  KeyValueFile kv;
  const auto num = [](double v) { return detail::join({v}); };
  const auto& rig = spec.scene.rig;
  kv.add("rig.f", num(rig.f));
  kv.add("rig.b", num(rig.b));
  kv.add("rig.cx", num(rig.cx));
  kv.add("rig.cy", num(rig.cy));
  kv.add("rig.width", std::to_string(rig.width));
  kv.add("rig.height", std::to_string(rig.height));
  kv.add("rig.d_max", std::to_string(rig.d_max));
  kv.add("seed", std::to_string(spec.scene.seed));
  kv.add("texture.cell", num(spec.scene.texture_cell));
  kv.add("background", std::to_string(spec.scene.background));
  for (const auto& p : spec.scene.planes) {
    kv.add("plane", detail::join({p.z, p.x_min, p.x_max, p.y_min, p.y_max, p.contrast}));
  }
  for (const auto& b : spec.scene.boxes) {
    kv.add("box", detail::join({b.lo.x(), b.lo.y(), b.lo.z(), b.hi.x(), b.hi.y(), b.hi.z(),
                                b.contrast}));
  }
  const auto& tr = spec.trajectory;
  kv.add("trajectory.frames", std::to_string(tr.frames));
  kv.add("trajectory.start", detail::join({tr.start.x(), tr.start.y(), tr.start.z()}));
  kv.add("trajectory.step", detail::join({tr.step.x(), tr.step.y(), tr.step.z()}));
  kv.add("trajectory.yaw_step_deg", num(tr.yaw_step * 180.0 / std::numbers::pi));
  kv.add("noise.sigma_rot_deg", num(spec.noise.sigma_rot * 180.0 / std::numbers::pi));
  kv.add("noise.sigma_trans", num(spec.noise.sigma_trans));
  kv.add("noise.image_sigma", num(spec.noise.image_sigma));
  kv.add("noise.seed", std::to_string(spec.noise.seed));
  return kv;
}

}  // namespace egosgm
