// KITTI-style file formats.
//
// Disparity PNG: 16-bit grayscale, disparity = value / 256, 0 = invalid.
//
// Pose file: one row-major 3x4 matrix per line (12 floats). Line k is the
// world-from-camera pose of the left camera at frame k, as in the KITTI
// odometry ground truth. The ego-motion consumed by prediction maps
// frame-(k-1) camera coordinates into frame-k coordinates and is derived as
// T_k = inverse(P_k) * P_(k-1). Files written with the opposite convention
// (camera-from-world) will silently produce inverted motion; check a known
// forward-driving sequence: its relative motions must translate by -z.
//
// Calibration: lines `NAME: 12 floats` holding rectified 3x4 projection
// matrices. The pair (P0, P1), (P2, P3) or (P_rect_02, P_rect_03) is used.
#pragma once

#include "egosgm/core.hpp"
#include "egosgm/kv_file.hpp"

#include <Eigen/SVD>
#include <png.h>

#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace egosgm {

class FormatError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

using RgbImage = Grid<std::array<std::uint8_t, 3>>;

namespace detail {

struct PngData {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<std::uint8_t> bytes;  // raw rows, big-endian for 16-bit
};

inline std::string describe_layout(int bit_depth, int color_type) {
  std::string kind;
  switch (color_type) {
    case PNG_COLOR_TYPE_GRAY: kind = "gray"; break;
    case PNG_COLOR_TYPE_GRAY_ALPHA: kind = "gray+alpha"; break;
    case PNG_COLOR_TYPE_RGB: kind = "rgb"; break;
    case PNG_COLOR_TYPE_RGB_ALPHA: kind = "rgba"; break;
    case PNG_COLOR_TYPE_PALETTE: kind = "palette"; break;
    default: kind = "color type " + std::to_string(color_type);
  }
  return std::to_string(bit_depth) + "-bit " + kind;
}

inline int channels_of(int color_type) {
  switch (color_type) {
    case PNG_COLOR_TYPE_GRAY: return 1;
    case PNG_COLOR_TYPE_GRAY_ALPHA: return 2;
    case PNG_COLOR_TYPE_RGB: return 3;
    case PNG_COLOR_TYPE_RGB_ALPHA: return 4;
    default: return 1;
  }
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

inline PngData read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error("cannot open " + path.string());
  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, 8, fp.get()) != 8 || png_sig_cmp(sig.data(), 0, 8) != 0) {
    throw FormatError(path.string() + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng initialisation failed");
  }
  PngData out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path.string() + ": corrupt PNG data");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.color_type = png_get_color_type(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

inline void write_png(const std::filesystem::path& path, int width, int height, int bit_depth,
                      int color_type, const std::vector<std::uint8_t>& bytes) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error("cannot create " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  const std::size_t stride =
      static_cast<std::size_t>(width) * channels_of(color_type) * (bit_depth / 8);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(bytes.data()) + stride * y;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(path.string() + ": PNG write failed");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

/// Encodes a disparity the way the KITTI devkit does; throws RangeError at
/// or above the 256 px format ceiling.
inline std::uint16_t encode_disparity(double d) {
  if (!(d >= 0.0) || !(d < 256.0)) {
    throw RangeError("disparity " + std::to_string(d) + " outside the encodable range [0, 256)");
  }
  const auto v = static_cast<std::uint16_t>(std::lround(d * 256.0));
  // A tiny positive disparity must not collapse onto the invalid sentinel.
  return v == 0 ? 1 : v;
}

inline DisparityMap decode_disparity(const Grid<std::uint16_t>& raw) {
  DisparityMap out(raw.width(), raw.height());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != 0) out.set(i, raw[i] / 256.0);
  }
  return out;
}

inline Grid<std::uint16_t> read_png16(const std::filesystem::path& path) {
  const auto png = detail::read_png(path);
  if (png.bit_depth != 16 || png.color_type != PNG_COLOR_TYPE_GRAY) {
    throw FormatError(path.string() + ": expected 16-bit single-channel PNG, found " +
                      detail::describe_layout(png.bit_depth, png.color_type));
  }
  Grid<std::uint16_t> out(png.width, png.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint16_t>((png.bytes[2 * i] << 8) | png.bytes[2 * i + 1]);
  }
  return out;
}

inline void write_png16(const Grid<std::uint16_t>& raw, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(raw.size() * 2);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(raw[i] >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(raw[i] & 0xff);
  }
  detail::write_png(path, raw.width(), raw.height(), 16, PNG_COLOR_TYPE_GRAY, bytes);
}

inline DisparityMap read_disparity_png(const std::filesystem::path& path) {
  return decode_disparity(read_png16(path));
}

inline void write_disparity_png(const DisparityMap& map, const std::filesystem::path& path) {
  Grid<std::uint16_t> raw(map.width(), map.height(), 0);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map.valid(i)) raw[i] = encode_disparity(map[i]);
  }
  write_png16(raw, path);
}

inline GrayImage read_gray_png(const std::filesystem::path& path) {
  const auto png = detail::read_png(path);
  if (png.bit_depth != 8 || png.color_type != PNG_COLOR_TYPE_GRAY) {
    throw FormatError(path.string() + ": expected 8-bit single-channel PNG, found " +
                      detail::describe_layout(png.bit_depth, png.color_type));
  }
  GrayImage out(png.width, png.height);
  std::copy(png.bytes.begin(), png.bytes.end(), out.data().begin());
  return out;
}

inline void write_gray_png(const GrayImage& image, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(image.data().begin(), image.data().end());
  detail::write_png(path, image.width(), image.height(), 8, PNG_COLOR_TYPE_GRAY, bytes);
}

inline void write_rgb_png(const RgbImage& image, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(image.size() * 3);
  for (const auto& px : image.data()) bytes.insert(bytes.end(), px.begin(), px.end());
  detail::write_png(path, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, bytes);
}

// Poses

/// Projects a near-rotation onto SO(3).
inline Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& r) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0) u.col(2) *= -1.0;
  return u * v.transpose();
}

inline std::vector<RigidMotion> parse_poses(std::istream& in, const std::string& source) {
  std::vector<RigidMotion> poses;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (detail::trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(number);
    const auto v = detail::parse_doubles(line, where);
    if (v.size() != 12) {
      throw ParseError(where + ": expected 12 values, got " + std::to_string(v.size()));
    }
    Eigen::Matrix3d r;
    r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    const Eigen::Vector3d t(v[3], v[7], v[11]);
    const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= 1e-6) || !(std::abs(r.determinant() - 1.0) <= 1e-6)) {
      throw ParseError(where + ": rotation is not orthonormal within 1e-6");
    }
    poses.emplace_back(nearest_rotation(r), t);
  }
  return poses;
}

inline std::vector<RigidMotion> read_pose_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_poses(in, path.string());
}

inline void write_pose_file(const std::vector<RigidMotion>& poses,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot create " + path.string());
  out << std::setprecision(17);
  for (const auto& p : poses) {
    const auto& m = p.matrix();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) {
        out << m(r, c) << ((r == 2 && c == 3) ? '\n' : ' ');
      }
    }
  }
}

/// Ego-motions from consecutive world-from-camera poses; entry 0 is the
/// identity.
inline std::vector<RigidMotion> relative_motions(const std::vector<RigidMotion>& poses) {
  std::vector<RigidMotion> out;
  out.reserve(poses.size());
  for (std::size_t k = 0; k < poses.size(); ++k) {
    out.push_back(k == 0 ? RigidMotion::identity() : poses[k].inverse() * poses[k - 1]);
  }
  return out;
}

// Calibration

struct CalibFile {
  double f = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double b = 0.0;

  StereoRig rig(int width, int height, int d_max) const {
    StereoRig r{f, b, cx, cy, width, height, d_max};
    r.validate();
    return r;
  }
};

inline CalibFile parse_calib(std::istream& in, const std::string& source) {
  std::map<std::string, std::vector<double>> mats;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = detail::trim(line.substr(0, colon));
    std::istringstream vs(line.substr(colon + 1));
    std::vector<double> v;
    double x = 0.0;
    while (vs >> x) v.push_back(x);
    if (v.size() == 12) mats[key] = v;
  }
  static const std::array<std::pair<const char*, const char*>, 3> pairs{
      {{"P0", "P1"}, {"P2", "P3"}, {"P_rect_02", "P_rect_03"}}};
  for (const auto& [lk, rk] : pairs) {
    if (!mats.count(lk) || !mats.count(rk)) continue;
    const auto& l = mats[lk];
    const auto& r = mats[rk];
    CalibFile c{l[0], l[2], l[6], 0.0};
    if (!(c.f > 0.0)) throw ParseError(source + ": non-positive focal length in " + lk);
    const auto close = [](double a, double b) {
      return std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(a));
    };
    if (!close(l[5], c.f) || !close(r[0], c.f) || !close(r[5], c.f) || !close(r[2], c.cx) ||
        !close(r[6], c.cy)) {
      throw ParseError(source + ": " + lk + "/" + rk + " are not a rectified pair");
    }
    // Projection column 3 holds -f * (camera offset along x).
    c.b = (l[3] - r[3]) / c.f;
    if (!(c.b > 0.0)) throw ParseError(source + ": non-positive baseline");
    return c;
  }
  throw ParseError(source + ": no rectified projection matrix pair (P0/P1, P2/P3, P_rect_02/03)");
}

inline CalibFile read_calib_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_calib(in, path.string());
}

inline void write_calib_file(const StereoRig& rig, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot create " + path.string());
  out << std::setprecision(17);
  const auto row = [&](const char* name, double tx) {
    out << name << ": " << rig.f << " 0 " << rig.cx << ' ' << tx << " 0 " << rig.f << ' '
        << rig.cy << " 0 0 0 1 0\n";
  };
  row("P0", 0.0);
  row("P1", -rig.f * rig.b);
}

}  // namespace egosgm
