// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Geometry>

#include "egosgm/egosgm.hpp"
#include "support/euclidean_oracle.hpp"
#include "support/reference_sgm.hpp"
#include "support/temp_dir.hpp"

#ifndef EGOSGM_CLI_PATH
#error "EGOSGM_CLI_PATH must point at the egosgm executable"
#endif
#ifndef EGOSGM_DATA_DIR
#error "EGOSGM_DATA_DIR must point at tests/data"
#endif

namespace fs = std::filesystem;
using namespace egosgm;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& check) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("[%s] %2d %-28s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), s);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

RigidMotion random_motion(std::mt19937_64& rng, double max_angle, double max_trans) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> ua(-max_angle, max_angle), ut(-max_trans, max_trans);
  const Eigen::Vector3d axis = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
  return RigidMotion(Eigen::AngleAxisd(ua(rng), axis).toRotationMatrix(),
                     Eigen::Vector3d(ut(rng), ut(rng), ut(rng)));
}

Estimate random_estimate(int w, int h, double d_max, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ud(1e-3, d_max), up(0.0, 16.0), uv(0.0, 1.0);
  Estimate e(w, h);
  for (std::size_t i = 0; i < e.disparity.size(); ++i) {
    if (uv(rng) < 0.75) e.set(i, ud(rng), up(rng));
  }
  return e;
}

Outcome warp_oracle() {
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> uf(100.0, 1000.0), ub(0.1, 1.0), u01(0.0, 1.0);
  const auto t0 = Clock::now();
  int draws = 0, attempts = 0;
  double worst = 0.0;
  while (draws < 10000) {
    ++attempts;
    const int w = 200 + static_cast<int>(u01(rng) * 1100), h = 100 + static_cast<int>(u01(rng) * 300);
    const StereoRig rig{uf(rng), ub(rng), w * (0.4 + 0.2 * u01(rng)), h * (0.4 + 0.2 * u01(rng)), w, h,
                        std::min(255, w - 1)};
    const auto t = random_motion(rng, 0.2, 2.0);
    const auto p = to_centered(rig, u01(rng) * (w - 1), u01(rng) * (h - 1), 0.5 + u01(rng) * (rig.d_max - 0.5));
    DisparityPoint want;
    try {
      want = egosgm::testing::euclidean_warp_oracle(rig, t, p);
    } catch (const GeometryError&) {
      continue;  // behind the camera: not a valid draw
    }
    const auto got = warp_point(disparity_homography(rig, t), p);
    for (auto [a, b] : {std::pair{got.x, want.x}, {got.y, want.y}, {got.d, want.d}}) {
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
    }
    ++draws;
  }
  const double s = seconds_since(t0);
  return {worst <= 1e-9 && s < 1.0,
          fmt("draws=%d (attempts=%d) max_rel_err=%.3g runtime=%.3fs (limit 1s)", draws, attempts, worst, s)};
}

Outcome identity_fixed_point() {
  std::mt19937_64 rng(1002);
  PredictionParams p;
  p.q = 0.0;
  p.reject_edges = false;
  p.fill_holes = false;
  int maps = 0, mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 16 + trial * 3, h = 8 + trial;
    const StereoRig rig{300.0, 0.5, w / 2.0 + 0.3, h / 2.0 - 0.2, w, h, w - 1};
    FilterState s;
    s.left = random_estimate(w, h, rig.d_max, rng);
    s.right = random_estimate(w, h, rig.d_max, rng);
    s.frame = trial;
    const auto out = predict_maps(s, RigidMotion::identity(), rig, p);
    maps += 2;
    if (!(out.left == s.left)) ++mismatches;
    if (!(out.right == s.right)) ++mismatches;
  }
  return {mismatches == 0, fmt("maps=%d bit-exact mismatches=%d", maps, mismatches)};
}

Outcome reduced_equals_full() {
  const auto t0 = Clock::now();
  const StereoRig rig{64.0, 1.0, 15.5, 15.5, 32, 32, 15};
  const SgmParams params;
  int pairs = 0, cost_diff = 0, disp_diff = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto scene = random_dolly_scene(seed, rig);
    const auto f = render_frame(scene, RigidMotion::translation(0.0, 0.0, 0.3 * seed));
    const IntervalMap full(rig.width, rig.height, rig.d_max);
    const auto agg = aggregate_paths(matching_cost(f.left, f.right, full, params), params);
    const auto d = select_disparity(agg);
    const auto ref_agg = egosgm::testing::reference_aggregate(
        egosgm::testing::reference_sad(f.left, f.right, rig.d_max, params.window), params.p1, params.p2);
    const auto ref_d = egosgm::testing::reference_wta(ref_agg);
    for (int y = 0; y < rig.height; ++y)
      for (int x = 0; x < rig.width; ++x) {
        for (int k = 0; k <= rig.d_max; ++k) cost_diff += agg.cost(x, y, k) != ref_agg.at(x, y, k);
        const int r = ref_d[full.index(x, y)];
        const bool same = r < 0 ? !d.valid(x, y) : (d.valid(x, y) && d(x, y) == r);
        disp_diff += !same;
      }
    ++pairs;
  }
  const double s = seconds_since(t0);
  return {cost_diff == 0 && disp_diff == 0 && s < 10.0,
          fmt("pairs=%d differing costs=%d differing disparities=%d runtime=%.2fs (limit 10s)", pairs,
              cost_diff, disp_diff, s)};
}

bool frames_ok(const std::vector<double>& frac) { return frac.size() == 10 && frac[0] == 1.0; }

Outcome search_space_reduction() {
  const auto t0 = Clock::now();
  const auto spec = parse_sequence_spec(KeyValueFile::load(fs::path(EGOSGM_DATA_DIR) / "dolly.seq"));
  const SyntheticSource source(spec, false);
  Pipeline pipeline(source.rig(), PipelineConfig{});
  std::vector<double> frac;
  for (std::size_t k = 0; k < source.size(); ++k) {
    const auto in = source.load(k);
    frac.push_back(pipeline.step(in.left, in.right, in.motion).search_fraction_left);
  }
  const double s = seconds_since(t0);
  const double worst = *std::max_element(frac.begin() + 1, frac.end());
  const bool bounded = worst <= 0.60;
  const bool trend = frac[1] >= frac[2] && frac[2] >= frac[3];
  return {frames_ok(frac) && bounded && trend && s < 60.0,
          fmt("frames=%zu max_fraction(k>=1)=%.4f (limit 0.60) f1=%.4f f2=%.4f f3=%.4f "
              "non-increasing=%s (net f3-f1=%+.4f) runtime=%.1fs (limit 60s)",
              frac.size(), worst, frac[1], frac[2], frac[3], trend ? "yes" : "no",
              frac[3] - frac[1], s)};
}

struct ContractionStats {
  std::size_t checked = 0;
  std::size_t violations = 0;
};

void check_contraction(const Estimate& pred, const Measurement& m, const Estimate& fused,
                       ContractionStats& st) {
  for (std::size_t i = 0; i < fused.disparity.size(); ++i) {
    if (!fused.disparity.valid(i) || !pred.disparity.valid(i)) continue;
    ++st.checked;
    const double dp = pred.disparity[i], pp = pred.variance[i];
    const double dm = m.disparity[i], r = m.variance[i];
    const double dd = fused.disparity[i], pd = fused.variance[i];
    const double tol = 1e-12 * std::max(1.0, std::abs(dd));
    const bool ok = pd <= std::min(pp, r) * (1.0 + 1e-12) && dd >= std::min(dp, dm) - tol &&
                    dd <= std::max(dp, dm) + tol;
    if (!ok) ++st.violations;
  }
}

ContractionStats contraction;

Outcome accuracy_improvement() {
  const auto t0 = Clock::now();
  double fused_sum = 0.0, base_sum = 0.0;
  int samples = 0;
  std::string per_seq;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SequenceSpec spec;
    spec.scene = random_dolly_scene(seed, default_synthetic_rig());
    spec.trajectory.frames = 10;
    spec.noise = {0.1 * std::numbers::pi / 180.0, 0.01, 5.0, 100 + seed};
    const SyntheticSource source(spec, true);
    PipelineConfig base_cfg;
    base_cfg.baseline_sgm = true;
    Pipeline proposed(source.rig(), PipelineConfig{});
    Pipeline baseline(source.rig(), base_cfg);
    double fs_seq = 0.0, bs_seq = 0.0;
    int n_seq = 0;
    for (std::size_t k = 0; k < source.size(); ++k) {
      const auto in = source.load(k);
      const auto r = proposed.step(in.left, in.right, in.motion);
      const auto b = baseline.step(in.left, in.right, in.motion);
      check_contraction(r.predicted.left, r.left, r.fused.left, contraction);
      check_contraction(r.predicted.right, r.right, r.fused.right, contraction);
      if (k < 2) continue;
      const double fr = bad_pixel_rate(r.fused.left.disparity, *in.gt_left, BadPixelRule::either).rate;
      const double br = bad_pixel_rate(b.fused.left.disparity, *in.gt_left, BadPixelRule::either).rate;
      fs_seq += fr;
      bs_seq += br;
      ++n_seq;
    }
    fused_sum += fs_seq;
    base_sum += bs_seq;
    samples += n_seq;
    per_seq += fmt(" s%d=%.4f/%.4f", int(seed), fs_seq / n_seq, bs_seq / n_seq);
  }
  const double s = seconds_since(t0);
  const double fused = fused_sum / samples, base = base_sum / samples;
  return {fused < base && s < 300.0,
          fmt("mean or-bad(k>=2) fused=%.4f baseline=%.4f [fused/baseline per seq:%s] runtime=%.1fs (limit 300s)",
              fused, base, per_seq.c_str(), s)};
}

Outcome kalman_contraction() {
  return {contraction.checked > 0 && contraction.violations == 0,
          fmt("fused pixels with a prediction checked=%zu violations=%zu", contraction.checked,
              contraction.violations)};
}

Outcome variance_finiteness() {
  const SgmParams params;
  std::size_t pixels = 0, bad = 0;
  for (std::uint8_t level : {0, 77, 128, 255}) {
    const GrayImage a(32, 32, level), b(32, 32, level);
    const IntervalMap iv(32, 32, 15);
    const auto agg = aggregate_paths(matching_cost(a, b, iv, params), params);
    for (std::size_t i = 0; i < agg.size(); ++i) {
      const double r = matching_variance(agg.at(i), argmin_cost(agg.at(i)), params);
      ++pixels;
      if (!std::isfinite(r) || r < params.r_min) ++bad;
    }
    const auto m = match_view(a, b, iv, params, View::left);
    for (std::size_t i = 0; i < m.disparity.size(); ++i) {
      if (m.disparity.valid(i) && (!std::isfinite(m.variance[i]) || m.variance[i] < params.r_min)) ++bad;
    }
  }
  return {bad == 0, fmt("pixels=%zu non-finite or below r_min=%zu", pixels, bad)};
}

// Pixel of frame k is non-occluded when it is visible in both views of frame k
// and its scene point was the visible surface in frame k-1 as well.
bool non_occluded(const StereoRig& rig, const StereoFrame& cur, const StereoFrame& prev,
                  const ProjectiveMap4& back, int x, int y) {
  const double d = cur.gt_left(x, y);
  const int xr = x - static_cast<int>(std::lround(d));
  if (xr < 0 || !cur.gt_right.valid(xr, y) || std::abs(cur.gt_right(xr, y) - d) > 1.0) return false;
  const auto p = from_centered(rig, warp_point(back, to_centered(rig, x, y, d)));
  const int px = static_cast<int>(std::floor(p.x + 0.5)), py = static_cast<int>(std::floor(p.y + 0.5));
  if (px < 0 || py < 0 || px >= rig.width || py >= rig.height || !prev.gt_left.valid(px, py)) return false;
  return std::abs(prev.gt_left(px, py) - p.d) <= std::max(1.0, 0.05 * p.d);
}

Outcome interval_calibration() {
  std::size_t eligible = 0, inside = 0;
  std::string per_seq;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto scene = random_dolly_scene(seed, default_synthetic_rig());
    const auto seq = make_sequence(scene, Trajectory::from_spec({10}), NoiseSpec{});
    const auto& rig = scene.rig;
    Pipeline pipeline(rig, PipelineConfig{});
    std::size_t e_seq = 0, i_seq = 0;
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const auto& f = seq[k].frame;
      const auto r = pipeline.step(f.left, f.right, seq[k].exact);
      if (!r.has_prediction) continue;
      const auto back = disparity_homography(rig, seq[k].exact.inverse());
      const auto& pred = r.predicted.left;
      for (int y = 0; y < rig.height; ++y)
        for (int x = 0; x < rig.width; ++x) {
          if (!pred.disparity.valid(x, y) || !f.gt_left.valid(x, y)) continue;
          if (!non_occluded(rig, f, seq[k - 1].frame, back, x, y)) continue;
          ++e_seq;
          const double half = 3.0 * std::sqrt(pred.variance(x, y));
          if (std::abs(f.gt_left(x, y) - pred.disparity(x, y)) <= half) ++i_seq;
        }
    }
    eligible += e_seq;
    inside += i_seq;
    per_seq += fmt(" s%d=%.4f", int(seed), double(i_seq) / double(e_seq));
  }
  const double rate = double(inside) / double(eligible);
  return {eligible > 0 && rate >= 0.95,
          fmt("covered=%.4f (limit 0.95) of %zu predicted non-occluded pixels [%s ]", rate, eligible,
              per_seq.c_str())};
}

Outcome format_fidelity() {
  egosgm::testing::TempDir tmp("acceptance-png");
  std::mt19937_64 rng(1009);
  std::uniform_int_distribution<int> dim(2, 64), raw(1, 65535);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    DisparityMap m(dim(rng), dim(rng));
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (u01(rng) < 0.8) m.set(i, raw(rng) / 256.0);
    }
    const auto path = tmp / "d.png";
    write_disparity_png(m, path);
    if (!(read_disparity_png(path) == m)) ++mismatches;
  }
  std::size_t and_bad = 0, or_bad = 0, subset_violations = 0;
  std::uniform_real_distribution<double> gt(0.01, 255.0), err(-25.0, 25.0);
  for (int i = 0; i < 1000000; ++i) {
    const double g = gt(rng), e = std::max(0.0, g + err(rng) * u01(rng));
    const bool a = is_bad_pixel(e, g, BadPixelRule::both), o = is_bad_pixel(e, g, BadPixelRule::either);
    and_bad += a;
    or_bad += o;
    subset_violations += a && !o;
  }
  return {mismatches == 0 && subset_violations == 0,
          fmt("png round trips=1000 mismatches=%d; metric draws=1e6 and-bad=%zu or-bad=%zu and-not-or=%zu",
              mismatches, and_bad, or_bad, subset_violations)};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  egosgm::testing::TempDir tmp("acceptance-run");
  const fs::path cfg = fs::path(EGOSGM_DATA_DIR) / "dolly.cfg";
  for (const char* name : {"a", "b"}) {
    const std::string cmd = std::string("\"") + EGOSGM_CLI_PATH + "\" run -q -c \"" + cfg.string() +
                            "\" -o \"" + (tmp / name).string() + "\"";
    if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
  }
  std::size_t files = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(tmp / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto other = tmp / "b" / fs::relative(e.path(), tmp / "a");
    if (!fs::exists(other) || read_file(e.path()) != read_file(other)) ++differing;
  }
  std::size_t files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(tmp / "b")) files_b += e.is_regular_file();
  return {files > 0 && differing == 0 && files == files_b,
          fmt("files=%zu/%zu differing=%zu", files, files_b, differing)};
}

}  // namespace

int main() {
  report(1, "warp-oracle equivalence", warp_oracle);
  report(2, "identity fixed point", identity_fixed_point);
  report(3, "reduced = full SGM", reduced_equals_full);
  report(4, "search-space reduction", search_space_reduction);
  report(5, "accuracy improvement", accuracy_improvement);
  report(6, "kalman contraction", kalman_contraction);
  report(7, "matching variance finite", variance_finiteness);
  report(8, "interval calibration", interval_calibration);
  report(9, "format fidelity", format_fidelity);
  report(10, "determinism", determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
