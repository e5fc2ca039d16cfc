// Per-pixel Kalman update of the predicted state with the SGM measurement.
#pragma once

#include "egosgm/core.hpp"
#include "egosgm/sgm.hpp"

namespace egosgm {

struct FusionParams {
  double p_init = 1.0;  // variance of a fresh, unpredicted match, px^2

  void validate() const {
    if (!(p_init > 0.0)) throw ContractViolation("p_init must be > 0");
  }
};

inline double kalman_gain(double p_pred, double r) { return p_pred / (p_pred + r); }

struct FusedPixel {
  double d = 0.0;
  double p = 0.0;
};

inline FusedPixel fuse_pixel(double d_pred, double p_pred, double d_meas, double r) {
  const double k = kalman_gain(p_pred, r);
  return {d_pred + k * (d_meas - d_pred), (1.0 - k) * p_pred};
}

/// Fuses one view. A pixel survives only with a valid measurement that
/// passed its consistency mask; a prediction alone is never carried over.
inline Estimate fuse_view(const Estimate& predicted, const Measurement& measured, const Mask& keep,
                          const FusionParams& params) {
  const int w = measured.disparity.width(), h = measured.disparity.height();
  if (!predicted.disparity.values().same_shape(w, h) || !keep.same_shape(w, h)) {
    throw ContractViolation("fuse_maps: inputs are not dimensionally consistent");
  }
  Estimate out(w, h);
  for (std::size_t i = 0; i < out.disparity.size(); ++i) {
    if (!measured.disparity.valid(i) || !keep[i]) continue;
    if (predicted.disparity.valid(i)) {
      const auto f = fuse_pixel(predicted.disparity[i], predicted.variance[i],
                                measured.disparity[i], measured.variance[i]);
      out.set(i, f.d, f.p);
    } else {
      out.set(i, measured.disparity[i], params.p_init);
    }
  }
  return out;
}

inline FilterState fuse_maps(const FilterState& predicted, const Measurement& left,
                             const Measurement& right, const Mask& keep_left,
                             const Mask& keep_right, const FusionParams& params) {
  params.validate();
  FilterState out;
  out.frame = predicted.frame;
  out.left = fuse_view(predicted.left, left, keep_left, params);
  out.right = fuse_view(predicted.right, right, keep_right, params);
  return out;
}

}  // namespace egosgm
