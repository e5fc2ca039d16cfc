// One predict -> match -> fuse iteration per stereo frame.
#pragma once

#include "egosgm/core.hpp"
#include "egosgm/eval.hpp"
#include "egosgm/fusion.hpp"
#include "egosgm/kv_file.hpp"
#include "egosgm/prediction.hpp"
#include "egosgm/sgm.hpp"

#include <set>
#include <string>
#include <utility>

namespace egosgm {

struct PipelineConfig {
  PredictionParams prediction;
  SgmParams sgm;
  FusionParams fusion;
  BadPixelRule metric = BadPixelRule::either;
  bool baseline_sgm = false;  // full-range SGM every frame, no temporal state

  void validate() const {
    prediction.validate();
    sgm.validate();
    fusion.validate();
  }
};

inline const std::set<std::string>& pipeline_config_keys() {
  static const std::set<std::string> keys{
      "q", "gamma_f", "gamma_e", "edge_window", "reject_edges", "fill_holes",
      "window", "p1", "p2", "s_max", "r_min", "tau_lr", "tau_sad", "p_init",
      "metric", "baseline_sgm"};
  return keys;
}

/// Reads every tunable from `kv`, keeping defaults for absent keys. Unknown
/// keys are left to the caller.
inline PipelineConfig parse_pipeline_config(const KeyValueFile& kv) {
  PipelineConfig c;
  auto& pr = c.prediction;
  pr.q = kv.get_double("q", pr.q);
  pr.gamma_f = kv.get_double("gamma_f", pr.gamma_f);
  pr.gamma_e = kv.get_double("gamma_e", pr.gamma_e);
  pr.edge_window = static_cast<int>(kv.get_int("edge_window", pr.edge_window));
  pr.reject_edges = kv.get_bool("reject_edges", pr.reject_edges);
  pr.fill_holes = kv.get_bool("fill_holes", pr.fill_holes);
  auto& s = c.sgm;
  s.window = static_cast<int>(kv.get_int("window", s.window));
  s.p1 = static_cast<int>(kv.get_int("p1", s.p1));
  s.p2 = static_cast<int>(kv.get_int("p2", s.p2));
  s.s_max = kv.get_double("s_max", s.s_max);
  s.r_min = kv.get_double("r_min", s.r_min);
  s.tau_lr = kv.get_double("tau_lr", s.tau_lr);
  s.tau_sad = kv.get_double("tau_sad", s.tau_sad);
  c.fusion.p_init = kv.get_double("p_init", c.fusion.p_init);
  c.metric = parse_bad_pixel_rule(kv.get_string("metric", "or"));
  c.baseline_sgm = kv.get_bool("baseline_sgm", false);
  c.validate();
  return c;
}

/// Everything produced while processing one frame.
struct FrameResult {
  int frame = 0;
  bool has_prediction = false;
  FilterState predicted;  // empty maps when there is no prediction
  Measurement left;
  Measurement right;
  Mask keep_left;
  Mask keep_right;
  FilterState fused;
  double search_fraction_left = 1.0;
  double search_fraction_right = 1.0;
};

class Pipeline {
 public:
  Pipeline(StereoRig rig, PipelineConfig config) : rig_(rig), config_(std::move(config)) {
    rig_.validate();
    config_.validate();
    state_ = make_empty_state(rig_);
  }

  const StereoRig& rig() const { return rig_; }
  const PipelineConfig& config() const { return config_; }
  const FilterState& state() const { return state_; }
  int frames_processed() const { return frames_; }

  /// `motion` maps the previous frame's camera coordinates into this frame's;
  /// it is ignored on the first frame and in baseline mode.
  FrameResult step(const GrayImage& left, const GrayImage& right, const RigidMotion& motion) {
    if (!left.same_shape(rig_.width, rig_.height) || !right.same_shape(rig_.width, rig_.height)) {
      throw ContractViolation("frame " + std::to_string(frames_) + ": image is " +
                              std::to_string(left.width()) + "x" + std::to_string(left.height()) +
                              ", rig expects " + std::to_string(rig_.width) + "x" +
                              std::to_string(rig_.height));
    }
    FrameResult r;
    r.frame = frames_;
    r.has_prediction = frames_ > 0 && !config_.baseline_sgm;
    r.predicted = r.has_prediction ? predict_maps(state_, motion, rig_, config_.prediction)
                                   : make_empty_state(rig_, frames_);
    check_estimate(r.predicted.left);
    check_estimate(r.predicted.right);

    const IntervalMap iv_left = search_intervals(r.predicted.left, rig_);
    const IntervalMap iv_right = search_intervals(r.predicted.right, rig_);
    r.search_fraction_left = search_space_fraction(iv_left);
    r.search_fraction_right = search_space_fraction(iv_right);

    r.left = match_view(left, right, iv_left, config_.sgm, View::left);
    r.right = match_view(right, left, iv_right, config_.sgm, View::right);

    auto [keep_left, keep_right] =
        lr_consistency(r.left.disparity, r.right.disparity, config_.sgm.tau_lr);
    const Mask sad_left =
        sad_check(left, right, r.left.disparity, config_.sgm.window, config_.sgm.tau_sad, View::left);
    const Mask sad_right = sad_check(right, left, r.right.disparity, config_.sgm.window,
                                     config_.sgm.tau_sad, View::right);
    for (std::size_t i = 0; i < keep_left.size(); ++i) {
      keep_left[i] = keep_left[i] & sad_left[i];
      keep_right[i] = keep_right[i] & sad_right[i];
    }
    r.keep_left = std::move(keep_left);
    r.keep_right = std::move(keep_right);

    r.fused = fuse_maps(r.predicted, r.left, r.right, r.keep_left, r.keep_right, config_.fusion);
    r.fused.frame = frames_;
    check_estimate(r.fused.left);
    check_estimate(r.fused.right);

    state_ = r.fused;
    ++frames_;
    return r;
  }

 private:
  void check_estimate(const Estimate& e) const {
    check_pair(e);
    check_disparity_range(e.disparity, rig_.d_max);
  }

  StereoRig rig_;
  PipelineConfig config_;
  FilterState state_;
  int frames_ = 0;
};

}  // namespace egosgm
