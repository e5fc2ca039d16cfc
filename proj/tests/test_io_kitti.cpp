#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "egosgm/io_kitti.hpp"
#include "support/temp_dir.hpp"

using namespace egosgm;
using egosgm::testing::TempDir;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(DisparityPng, Encoding) {
  EXPECT_EQ(encode_disparity(20.0), 5120);
  Grid<std::uint16_t> raw(2, 1);
  raw[0] = 5120;
  const auto d = decode_disparity(raw);
  EXPECT_EQ(d[0], 20.0);
  EXPECT_FALSE(d.valid(1));
  EXPECT_EQ(encode_disparity(0.001), 1);  // never the invalid sentinel
  EXPECT_THROW(encode_disparity(256.0), RangeError);
  EXPECT_THROW(encode_disparity(-1.0), RangeError);
}

TEST(DisparityPng, WriteReadRoundTrip) {
  TempDir tmp("png");
  DisparityMap m(7, 5);
  m.set(0, 0, 20.0);
  m.set(3, 2, 0.5);
  m.set(6, 4, 255.99609375);
  write_disparity_png(m, tmp / "d.png");
  const auto raw = read_png16(tmp / "d.png");
  EXPECT_EQ(raw(0, 0), 5120);
  EXPECT_EQ(raw(1, 0), 0);
  EXPECT_EQ(read_disparity_png(tmp / "d.png"), m);
}

TEST(DisparityPng, FuzzedRawRoundTripIsBitExact) {
  TempDir tmp("fuzz");
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dim(2, 40);
  std::uniform_int_distribution<int> val(0, 65535);
  for (int trial = 0; trial < 50; ++trial) {
    Grid<std::uint16_t> raw(dim(rng), dim(rng));
    for (auto& v : raw.data()) v = static_cast<std::uint16_t>(val(rng));
    write_png16(raw, tmp / "r.png");
    EXPECT_EQ(read_png16(tmp / "r.png"), raw);
    const auto d = read_disparity_png(tmp / "r.png");
    write_disparity_png(d, tmp / "s.png");
    EXPECT_EQ(read_png16(tmp / "s.png"), raw);
  }
}

TEST(DisparityPng, WrongLayoutNamesPathAndLayout) {
  TempDir tmp("layout");
  write_gray_png(GrayImage(4, 4, 9), tmp / "gray8.png");
  const auto msg = message_of([&] { read_disparity_png(tmp / "gray8.png"); });
  EXPECT_NE(msg.find("gray8.png"), std::string::npos) << msg;
  EXPECT_NE(msg.find("8-bit"), std::string::npos) << msg;
  EXPECT_THROW(read_disparity_png(tmp / "gray8.png"), FormatError);

  DisparityMap m(3, 3);
  m.set(0, 0, 5.0);
  write_disparity_png(m, tmp / "d16.png");
  EXPECT_THROW(read_gray_png(tmp / "d16.png"), FormatError);
  EXPECT_THROW(read_disparity_png(tmp / "missing.png"), Error);
}

TEST(DisparityPng, OutOfRangeRaises) {
  TempDir tmp("range");
  DisparityMap m(2, 2);
  m.set(0, 0, 300.0);
  EXPECT_THROW(write_disparity_png(m, tmp / "x.png"), RangeError);
}

TEST(GrayPng, RoundTrip) {
  TempDir tmp("gray");
  GrayImage im(9, 4);
  for (std::size_t i = 0; i < im.size(); ++i) im[i] = static_cast<std::uint8_t>(i * 7);
  write_gray_png(im, tmp / "g.png");
  EXPECT_EQ(read_gray_png(tmp / "g.png"), im);
}

TEST(Poses, IdentityLine) {
  std::istringstream in("1 0 0 0 0 1 0 0 0 0 1 0\n");
  const auto p = parse_poses(in, "poses.txt");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_TRUE(p[0].matrix().isIdentity(0));
}

TEST(Poses, RelativeMotions) {
  std::istringstream same("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 0 0 0 1 0\n");
  const auto a = relative_motions(parse_poses(same, "s"));
  EXPECT_TRUE(a[1].matrix().isIdentity(1e-15));

  // Camera advances 1 m along its optical axis: static points come 1 m closer.
  std::istringstream fwd("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 0 0 0 1 1\n");
  const auto b = relative_motions(parse_poses(fwd, "f"));
  EXPECT_TRUE(b[1].translation().isApprox(Eigen::Vector3d(0, 0, -1)));
  EXPECT_TRUE(b[1].rotation().isIdentity(1e-15));
}

TEST(Poses, ErrorsCarryLineNumbers) {
  std::istringstream short_line("1 0 0 0 0 1 0 0 0 0 1 0\n\n1 0 0 0 0 1 0 0 0 0 1\n");
  const auto m1 = message_of([&] { parse_poses(short_line, "p.txt"); });
  EXPECT_NE(m1.find("p.txt:3"), std::string::npos) << m1;

  std::istringstream skew("1 0 0 0 0 1 0 0 0 0 1 0\n1 0.01 0 0 0 1 0 0 0 0 1 0\n");
  const auto m2 = message_of([&] { parse_poses(skew, "p.txt"); });
  EXPECT_NE(m2.find("p.txt:2"), std::string::npos) << m2;
  EXPECT_NE(m2.find("orthonormal"), std::string::npos) << m2;

  std::istringstream junk("1 0 0 x 0 1 0 0 0 0 1 0\n");
  EXPECT_THROW(parse_poses(junk, "p.txt"), ParseError);
}

TEST(Poses, FileRoundTrip) {
  TempDir tmp("pose");
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<RigidMotion> poses;
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d axis = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    poses.emplace_back(Eigen::AngleAxisd(n(rng), axis).toRotationMatrix(),
                       Eigen::Vector3d(n(rng), n(rng), n(rng)) * 10.0);
  }
  write_pose_file(poses, tmp / "poses.txt");
  const auto back = read_pose_file(tmp / "poses.txt");
  ASSERT_EQ(back.size(), poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    EXPECT_LE((back[i].matrix() - poses[i].matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Calibration, KittiStyleFile) {
  std::istringstream in(
      "P0: 7.215377e+02 0 6.095593e+02 0 0 7.215377e+02 1.728540e+02 0 0 0 1 0\n"
      "P1: 7.215377e+02 0 6.095593e+02 -3.875744e+02 0 7.215377e+02 1.728540e+02 0 0 0 1 0\n"
      "Tr: 1 0 0 0 0 1 0 0 0 0 1 0\n");
  const auto c = parse_calib(in, "calib.txt");
  EXPECT_DOUBLE_EQ(c.f, 721.5377);
  EXPECT_DOUBLE_EQ(c.cx, 609.5593);
  EXPECT_DOUBLE_EQ(c.cy, 172.854);
  EXPECT_NEAR(c.b, 0.5371, 1e-4);
}

TEST(Calibration, WriteReadRoundTrip) {
  TempDir tmp("calib");
  const StereoRig rig{200.0, 0.5, 127.5, 63.5, 256, 128, 63};
  write_calib_file(rig, tmp / "calib.txt");
  const auto c = read_calib_file(tmp / "calib.txt");
  EXPECT_EQ(c.rig(256, 128, 63).f, 200.0);
  EXPECT_DOUBLE_EQ(c.b, 0.5);
  EXPECT_EQ(c.cx, 127.5);
}

TEST(Calibration, Errors) {
  std::istringstream none("Tr: 1 0 0 0 0 1 0 0 0 0 1 0\n");
  EXPECT_THROW(parse_calib(none, "c"), ParseError);
  std::istringstream unrectified(
      "P0: 700 0 600 0 0 700 170 0 0 0 1 0\n"
      "P1: 710 0 600 -350 0 710 170 0 0 0 1 0\n");
  EXPECT_THROW(parse_calib(unrectified, "c"), ParseError);
}
