// Disparity prediction: forward-warp the previous estimate into the current
// frame through the disparity-space homography.
#pragma once

#include "egosgm/core.hpp"
#include "egosgm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace egosgm {

struct PredictionParams {
  double q = 0.5;        // ego-motion noise variance, px^2
  double gamma_f = 3.0;  // hole-fill similarity threshold, px
  double gamma_e = 3.0;  // edge-rejection disparity range threshold, px
  int edge_window = 1;   // edge-test neighborhood radius
  bool reject_edges = true;
  bool fill_holes = true;

  void validate() const {
    if (!(q >= 0.0)) throw ContractViolation("q must be >= 0");
    if (!(gamma_f > 0.0)) throw ContractViolation("gamma_f must be > 0");
    if (!(gamma_e > 0.0)) throw ContractViolation("gamma_e must be > 0");
    if (edge_window < 1) throw ContractViolation("edge_window must be >= 1");
  }
};

/// Marks (1) every valid pixel whose (2r+1)^2 neighborhood spans a valid
/// disparity range above gamma_e.
inline Mask reject_edges(const DisparityMap& d, double gamma_e, int window) {
  Mask rejected(d.width(), d.height(), 0);
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (!d.valid(x, y)) continue;
      double lo = d(x, y), hi = d(x, y);
      for (int v = std::max(0, y - window); v <= std::min(d.height() - 1, y + window); ++v) {
        for (int u = std::max(0, x - window); u <= std::min(d.width() - 1, x + window); ++u) {
          if (!d.valid(u, v)) continue;
          lo = std::min(lo, d(u, v));
          hi = std::max(hi, d(u, v));
        }
      }
      if (hi - lo > gamma_e) rejected(x, y) = 1;
    }
  }
  return rejected;
}

/// p' = (d_pred / d_prev)^2 p + q.
inline double propagate_variance(double d_prev, double d_pred, double p_prev, double q) {
  if (!(d_prev > 0.0)) throw ContractViolation("propagate_variance requires d_prev > 0");
  const double phi = d_pred / d_prev;
  return phi * phi * p_prev + q;
}

/// Fills single-pixel gaps between similar neighbors, first along rows and
/// then along columns of the row-filled map. A filled pixel gets the mean of
/// its two neighbors and the larger of their variances plus q.
inline Estimate fill_zoom_holes(const Estimate& pred, double gamma_f, double q) {
  const int w = pred.width(), h = pred.height();
  const auto similar = [gamma_f](double a, double b) { return std::abs(a - b) < gamma_f; };

  Estimate rows = pred;
  for (int y = 0; y < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const auto& src = pred.disparity;
      if (src.valid(x, y) || !src.valid(x - 1, y) || !src.valid(x + 1, y)) continue;
      const double a = src(x - 1, y), b = src(x + 1, y);
      if (!similar(a, b)) continue;
      const double p = std::max(pred.variance(x - 1, y), pred.variance(x + 1, y)) + q;
      rows.set(rows.variance.index(x, y), 0.5 * (a + b), p);
    }
  }

  Estimate out = rows;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto& src = rows.disparity;
      if (src.valid(x, y) || !src.valid(x, y - 1) || !src.valid(x, y + 1)) continue;
      const double a = src(x, y - 1), b = src(x, y + 1);
      if (!similar(a, b)) continue;
      const double p = std::max(rows.variance(x, y - 1), rows.variance(x, y + 1)) + q;
      out.set(out.variance.index(x, y), 0.5 * (a + b), p);
    }
  }
  return out;
}

/// Warps one view's estimate. Targets are rounded to the nearest pixel; on
/// collision the largest predicted disparity wins, and equal disparities keep
/// the first source in row-major order.
inline Estimate warp_estimate(const Estimate& prev, const ProjectiveMap4& h, const StereoRig& rig,
                              const PredictionParams& params) {
  const int w = rig.width, ht = rig.height;
  Estimate out(w, ht);
  const Mask rejected = params.reject_edges
                            ? reject_edges(prev.disparity, params.gamma_e, params.edge_window)
                            : Mask(w, ht, 0);
  const auto& m = h.matrix();
  const double d_max = rig.d_max;

  for (int y = 0; y < ht; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t si = prev.disparity.values().index(x, y);
      if (!prev.disparity.valid(si) || rejected[si]) continue;
      const double d = prev.disparity[si];
      const double xc = x - rig.cx, yc = y - rig.cy;
      const double s = m(3, 0) * xc + m(3, 1) * yc + m(3, 2) * d + m(3, 3);
      if (std::abs(s) < 1e-12) continue;
      const double dn = (m(2, 0) * xc + m(2, 1) * yc + m(2, 2) * d + m(2, 3)) / s;
      if (!(dn > 0.0 && dn <= d_max)) continue;
      const double xn = (m(0, 0) * xc + m(0, 1) * yc + m(0, 2) * d + m(0, 3)) / s + rig.cx;
      const double yn = (m(1, 0) * xc + m(1, 1) * yc + m(1, 2) * d + m(1, 3)) / s + rig.cy;
      const double tx = std::floor(xn + 0.5), ty = std::floor(yn + 0.5);
      if (!(tx >= 0.0 && ty >= 0.0 && tx < w && ty < ht)) continue;
      const std::size_t ti = out.variance.index(static_cast<int>(tx), static_cast<int>(ty));
      if (out.disparity.valid(ti) && !(dn > out.disparity[ti])) continue;
      out.set(ti, dn, propagate_variance(d, dn, prev.variance[si], params.q));
    }
  }

  if (params.fill_holes) out = fill_zoom_holes(out, params.gamma_f, params.q);
  return out;
}

/// Predicts both views of the next frame from `state` under ego-motion T
/// (previous-frame coordinates to current-frame coordinates).
inline FilterState predict_maps(const FilterState& state, const RigidMotion& motion,
                                const StereoRig& rig, const PredictionParams& params) {
  rig.validate();
  params.validate();
  if (!state.left.disparity.values().same_shape(rig.width, rig.height) ||
      !state.right.disparity.values().same_shape(rig.width, rig.height)) {
    throw ContractViolation("filter state does not match rig dimensions");
  }
  FilterState out;
  out.frame = state.frame + 1;
  out.left = warp_estimate(state.left, disparity_homography(rig, motion), rig, params);
  out.right = warp_estimate(state.right,
                            disparity_homography(rig, right_camera_motion(rig, motion)), rig,
                            params);
  return out;
}

}  // namespace egosgm
