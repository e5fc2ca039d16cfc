// Sequence sources, on-disk outputs and metric reports for the CLI.
#pragma once

#include "egosgm/eval.hpp"
#include "egosgm/io_kitti.hpp"
#include "egosgm/kv_file.hpp"
#include "egosgm/pipeline.hpp"
#include "egosgm/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace egosgm {

namespace fs = std::filesystem;

inline std::string frame_name(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu.png", k);
  return buf;
}

/// Frame k of a stereo sequence, with optional ground truth.
struct InputFrame {
  GrayImage left;
  GrayImage right;
  RigidMotion motion;  // frame k-1 -> frame k; identity for k = 0
  std::optional<DisparityMap> gt_left;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual const StereoRig& rig() const = 0;
  virtual std::size_t size() const = 0;
  virtual InputFrame load(std::size_t k) const = 0;
};

/// Renders a sequence spec in memory.
class SyntheticSource : public FrameSource {
 public:
  SyntheticSource(const SequenceSpec& spec, bool noisy_motion)
      : rig_(spec.scene.rig),
        frames_(make_sequence(spec.scene, Trajectory::from_spec(spec.trajectory), spec.noise)),
        noisy_motion_(noisy_motion) {}

  const StereoRig& rig() const override { return rig_; }
  std::size_t size() const override { return frames_.size(); }
  InputFrame load(std::size_t k) const override {
    const auto& f = frames_.at(k);
    return {f.frame.left, f.frame.right, noisy_motion_ ? f.noisy : f.exact, f.frame.gt_left};
  }

 private:
  StereoRig rig_;
  std::vector<SequenceFrame> frames_;
  bool noisy_motion_;
};

/// KITTI-style directory:
///   left/*.png right/*.png   8-bit grayscale, paired by sorted file name
///   calib.txt                rectified projection matrices
///   poses.txt                world-from-camera poses, one line per frame
///   gt_left/*.png            optional 16-bit ground truth, same names
class DirectorySource : public FrameSource {
 public:
  DirectorySource(const fs::path& root, int d_max, const std::string& pose_file = "poses.txt")
      : root_(root) {
    if (!fs::is_directory(root)) throw Error("input directory " + root.string() + " not found");
    left_ = list_pngs(root / "left");
    if (left_.empty()) throw Error(root.string() + "/left contains no PNG files");
    for (const auto& p : left_) {
      if (!fs::exists(root / "right" / p.filename())) {
        throw Error("missing right image for " + p.filename().string());
      }
    }
    const GrayImage first = read_gray_png(left_.front());
    rig_ = read_calib_file(root / "calib.txt").rig(first.width(), first.height(), d_max);
    const auto poses = read_pose_file(root / pose_file);
    if (poses.size() < left_.size()) {
      throw Error(root.string() + "/" + pose_file + " has " + std::to_string(poses.size()) +
                  " poses for " + std::to_string(left_.size()) + " frames");
    }
    motions_ = relative_motions(poses);
  }

  const StereoRig& rig() const override { return rig_; }
  std::size_t size() const override { return left_.size(); }
  InputFrame load(std::size_t k) const override {
    const auto name = left_.at(k).filename();
    InputFrame f{read_gray_png(left_[k]), read_gray_png(root_ / "right" / name), motions_[k], {}};
    const fs::path gt = root_ / "gt_left" / name;
    if (fs::exists(gt)) f.gt_left = read_disparity_png(gt);
    return f;
  }

 private:
  static std::vector<fs::path> list_pngs(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  fs::path root_;
  StereoRig rig_;
  std::vector<fs::path> left_;
  std::vector<RigidMotion> motions_;
};

struct RunOptions {
  PipelineConfig pipeline;
  std::string source = "synthetic";  // synthetic | directory
  fs::path sequence;                 // synthetic: sequence spec file
  fs::path input;                    // directory: sequence root
  std::string poses = "poses.txt";
  fs::path output = "egosgm_out";
  bool noisy_motion = false;
  int d_max = 0;  // directory sources; synthetic takes it from the spec
};

inline const std::set<std::string>& run_config_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k = pipeline_config_keys();
    k.insert({"source", "sequence", "input", "poses", "output", "motion", "d_max"});
    return k;
  }();
  return keys;
}

/// Relative paths resolve against `base`, the config file's directory.
inline RunOptions parse_run_config(const KeyValueFile& kv, const fs::path& base) {
  kv.require_known(run_config_keys());
  RunOptions o;
  o.pipeline = parse_pipeline_config(kv);
  const auto resolve = [&](const std::string& p) -> fs::path {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  o.source = kv.get_string("source", "synthetic");
  if (o.source != "synthetic" && o.source != "directory") {
    throw ParseError(kv.source() + ": source must be 'synthetic' or 'directory'");
  }
  if (auto s = kv.get("sequence")) o.sequence = resolve(*s);
  if (auto s = kv.get("input")) o.input = resolve(*s);
  if (auto s = kv.get("output")) o.output = resolve(*s);
  o.poses = kv.get_string("poses", o.poses);
  const std::string motion = kv.get_string("motion", "exact");
  if (motion != "exact" && motion != "noisy") {
    throw ParseError(kv.source() + ": motion must be 'exact' or 'noisy'");
  }
  o.noisy_motion = motion == "noisy";
  o.d_max = static_cast<int>(kv.get_int("d_max", 0));
  if (o.source == "synthetic" && o.sequence.empty()) {
    throw ParseError(kv.source() + ": synthetic source requires 'sequence'");
  }
  if (o.source == "directory") {
    if (o.input.empty()) throw ParseError(kv.source() + ": directory source requires 'input'");
    if (o.d_max < 1) throw ParseError(kv.source() + ": directory source requires 'd_max'");
  }
  return o;
}

inline std::unique_ptr<FrameSource> open_source(const RunOptions& o) {
  if (o.source == "directory") return std::make_unique<DirectorySource>(o.input, o.d_max, o.poses);
  SequenceSpec spec = parse_sequence_spec(KeyValueFile::load(o.sequence));
  if (o.d_max > 0) spec.scene.rig.d_max = o.d_max;
  return std::make_unique<SyntheticSource>(spec, o.noisy_motion);
}

struct FrameMetrics {
  int frame = 0;
  double search_fraction_left = 1.0;
  double search_fraction_right = 1.0;
  double density = 0.0;
  std::optional<BadPixelStats> quality;
};

struct RunSummary {
  std::vector<FrameMetrics> frames;
  BadPixelRule metric = BadPixelRule::either;
  bool baseline = false;
};

namespace detail {

inline std::string fixed6(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

inline std::string format_metrics_line(const FrameMetrics& m) {
  std::ostringstream os;
  os << "frame=" << m.frame << " search_fraction_left=" << detail::fixed6(m.search_fraction_left)
     << " search_fraction_right=" << detail::fixed6(m.search_fraction_right)
     << " density=" << detail::fixed6(m.density);
  if (m.quality) {
    os << " bad_rate=" << detail::fixed6(m.quality->rate)
       << " bad_rate_all=" << detail::fixed6(m.quality->rate_all)
       << " gt_density=" << detail::fixed6(m.quality->density);
  }
  return os.str();
}

/// key=value summary; rates are averaged over frames with ground truth.
inline std::string format_summary(const RunSummary& s) {
  std::vector<double> frac, dens, bad, bad_all, bad_late;
  for (const auto& f : s.frames) {
    if (f.frame >= 1) frac.push_back(f.search_fraction_left);
    dens.push_back(f.density);
    if (f.quality) {
      bad.push_back(f.quality->rate);
      bad_all.push_back(f.quality->rate_all);
      if (f.frame >= 2) bad_late.push_back(f.quality->rate);
    }
  }
  std::ostringstream os;
  os << "mode=" << (s.baseline ? "baseline_sgm" : "proposed") << "\n"
     << "metric=" << to_string(s.metric) << "\n"
     << "frames=" << s.frames.size() << "\n"
     << "mean_search_fraction_after_first=" << detail::fixed6(detail::mean_of(frac)) << "\n"
     << "mean_density=" << detail::fixed6(detail::mean_of(dens)) << "\n";
  if (!bad.empty()) {
    os << "mean_bad_rate=" << detail::fixed6(detail::mean_of(bad)) << "\n"
       << "mean_bad_rate_all=" << detail::fixed6(detail::mean_of(bad_all)) << "\n"
       << "mean_bad_rate_from_frame2=" << detail::fixed6(detail::mean_of(bad_late)) << "\n";
  }
  return os.str();
}

/// Runs the pipeline over every frame of `source`, writing
///   <output>/disp_left/NNNNNN.png, <output>/disp_right/NNNNNN.png,
///   <output>/metrics.txt (one line per frame), <output>/summary.txt.
inline RunSummary run_pipeline(const FrameSource& source, const PipelineConfig& config,
                               const fs::path& output, std::ostream* log = nullptr) {
  fs::create_directories(output / "disp_left");
  fs::create_directories(output / "disp_right");
  Pipeline pipeline(source.rig(), config);
  RunSummary summary;
  summary.metric = config.metric;
  summary.baseline = config.baseline_sgm;
  std::ofstream metrics(output / "metrics.txt");
  if (!metrics) throw Error("cannot create " + (output / "metrics.txt").string());

  for (std::size_t k = 0; k < source.size(); ++k) {
    const InputFrame in = source.load(k);
    const FrameResult r = pipeline.step(in.left, in.right, in.motion);
    write_disparity_png(r.fused.left.disparity, output / "disp_left" / frame_name(k));
    write_disparity_png(r.fused.right.disparity, output / "disp_right" / frame_name(k));
    FrameMetrics m{r.frame, r.search_fraction_left, r.search_fraction_right,
                   density(r.fused.left.disparity), std::nullopt};
    if (in.gt_left) m.quality = bad_pixel_rate(r.fused.left.disparity, *in.gt_left, config.metric);
    const std::string line = format_metrics_line(m);
    metrics << line << "\n";
    if (log) *log << line << "\n";
    summary.frames.push_back(m);
  }
  std::ofstream(output / "summary.txt") << format_summary(summary);
  return summary;
}

inline RunSummary run_pipeline(const RunOptions& options, std::ostream* log = nullptr) {
  const auto source = open_source(options);
  return run_pipeline(*source, options.pipeline, options.output, log);
}

/// Writes a synthetic sequence as a directory readable by DirectorySource,
/// plus gt_right/, poses_noisy.txt (poses chained from the noisy motions)
/// and a copy of the spec.
inline void export_sequence(const SequenceSpec& spec, const fs::path& out) {
  for (const char* d : {"left", "right", "gt_left", "gt_right"}) fs::create_directories(out / d);
  const auto frames = make_sequence(spec.scene, Trajectory::from_spec(spec.trajectory), spec.noise);
  std::vector<RigidMotion> poses, noisy_poses;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    write_gray_png(f.frame.left, out / "left" / frame_name(k));
    write_gray_png(f.frame.right, out / "right" / frame_name(k));
    write_disparity_png(f.frame.gt_left, out / "gt_left" / frame_name(k));
    write_disparity_png(f.frame.gt_right, out / "gt_right" / frame_name(k));
    poses.push_back(f.pose);
    noisy_poses.push_back(k == 0 ? f.pose : noisy_poses.back() * f.noisy.inverse());
  }
  write_pose_file(poses, out / "poses.txt");
  write_pose_file(noisy_poses, out / "poses_noisy.txt");
  write_calib_file(spec.scene.rig, out / "calib.txt");
  std::ofstream(out / "sequence.txt") << to_key_values(spec).to_string();
}

/// Estimate/ground-truth PNG pairs matched by file name.
inline std::vector<std::pair<fs::path, fs::path>> match_disparity_files(const fs::path& estimate,
                                                                        const fs::path& truth) {
  if (!fs::is_directory(estimate)) throw Error("estimate directory " + estimate.string() + " not found");
  if (!fs::is_directory(truth)) throw Error("ground-truth directory " + truth.string() + " not found");
  std::vector<std::pair<fs::path, fs::path>> out;
  for (const auto& e : fs::directory_iterator(estimate)) {
    if (e.path().extension() != ".png") continue;
    const fs::path gt = truth / e.path().filename();
    if (fs::exists(gt)) out.emplace_back(e.path(), gt);
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error("no matching PNG names in " + estimate.string() + " and " + truth.string());
  return out;
}

struct FileMetrics {
  std::string name;
  BadPixelStats stats;
};

inline std::vector<FileMetrics> evaluate_directories(const fs::path& estimate, const fs::path& truth,
                                                     BadPixelRule rule) {
  std::vector<FileMetrics> out;
  for (const auto& [est, gt] : match_disparity_files(estimate, truth)) {
    const DisparityMap e = read_disparity_png(est);
    const DisparityMap g = read_disparity_png(gt);
    if (!e.values().same_shape(g.values())) {
      throw Error(est.string() + ": dimensions differ from " + gt.string());
    }
    out.push_back({est.filename().string(), bad_pixel_rate(e, g, rule)});
  }
  return out;
}

inline std::string format_file_metrics(const FileMetrics& m) {
  return "file=" + m.name + " bad_rate=" + detail::fixed6(m.stats.rate) +
         " bad_rate_all=" + detail::fixed6(m.stats.rate_all) +
         " gt_density=" + detail::fixed6(m.stats.density);
}

inline void render_error_images(const fs::path& estimate, const fs::path& truth,
                                const fs::path& output, BadPixelRule rule) {
  fs::create_directories(output);
  for (const auto& [est, gt] : match_disparity_files(estimate, truth)) {
    write_rgb_png(error_image(read_disparity_png(est), read_disparity_png(gt), rule),
                  output / est.filename());
  }
}

}  // namespace egosgm
