// Eight-path semi-global matching over per-pixel disparity intervals.
//
// Every pixel carries its own closed search interval [lo, hi]. Costs exist
// only inside it; everything outside behaves as +infinity in the path
// recurrence, and path minima are taken over each predecessor's own interval.
#pragma once

#include "egosgm/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace egosgm {

struct SgmParams {
  int window = 3;       // odd matching-window side
  int p1 = 7;           // small smoothness penalty
  int p2 = 86;          // large smoothness penalty
  double s_max = 10.0;  // cost budget for the matching-variance count
  double r_min = 0.25;  // measurement variance floor, px^2
  double tau_lr = 1.0;  // left-right tolerance, px
  double tau_sad = 200.0;

  void validate() const {
    if (window < 3 || window % 2 == 0) throw ContractViolation("window must be odd and >= 3");
    if (!(p1 > 0 && p1 <= p2)) throw ContractViolation("require 0 < P1 <= P2");
    if (!(s_max > 0.0)) throw ContractViolation("S_max must be > 0");
    if (!(r_min > 0.0)) throw ContractViolation("r_min must be > 0");
    if (!(tau_lr >= 0.0) || !(tau_sad >= 0.0)) throw ContractViolation("tolerances must be >= 0");
  }
};

/// Which image is the reference. For the left view the other image is sampled
/// at x - d, for the right view at x + d.
enum class View { left, right };

inline int other_column(View view, int x, int d) { return view == View::left ? x - d : x + d; }

class IntervalMap {
 public:
  IntervalMap() = default;
  /// All pixels full range [0, d_max].
  IntervalMap(int width, int height, int d_max)
      : width_(width),
        height_(height),
        d_max_(d_max),
        lo_(static_cast<std::size_t>(width) * height, 0),
        hi_(static_cast<std::size_t>(width) * height, d_max),
        constrained_(static_cast<std::size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int d_max() const { return d_max_; }
  std::size_t size() const { return lo_.size(); }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int lo(std::size_t i) const { return lo_[i]; }
  int hi(std::size_t i) const { return hi_[i]; }
  int lo(int x, int y) const { return lo_[index(x, y)]; }
  int hi(int x, int y) const { return hi_[index(x, y)]; }
  bool constrained(std::size_t i) const { return constrained_[i] != 0; }
  /// Number of disparities searched at pixel i (0 for an empty interval).
  int count(std::size_t i) const { return std::max(0, hi_[i] - lo_[i] + 1); }
  bool contains(std::size_t i, int d) const { return d >= lo_[i] && d <= hi_[i]; }

  void set(std::size_t i, int lo, int hi) {
    lo_[i] = lo;
    hi_[i] = hi;
    constrained_[i] = 1;
  }
  void set(int x, int y, int lo, int hi) { set(index(x, y), lo, hi); }
  void set_full(std::size_t i) {
    lo_[i] = 0;
    hi_[i] = d_max_;
    constrained_[i] = 0;
  }

  std::size_t total_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) n += static_cast<std::size_t>(count(i));
    return n;
  }

  bool operator==(const IntervalMap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int d_max_ = 0;
  std::vector<int> lo_;
  std::vector<int> hi_;
  std::vector<std::uint8_t> constrained_;
};

/// Reduced interval [floor(d - 3 sqrt(p)), ceil(d + 3 sqrt(p))], clamped to
/// [0, d_max] and kept at least two disparities wide. Unpredicted pixels get
/// the full range.
inline IntervalMap search_intervals(const Estimate& pred, const StereoRig& rig) {
  rig.validate();
  IntervalMap out(rig.width, rig.height, rig.d_max);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!pred.disparity.valid(i)) continue;
    const double d = pred.disparity[i];
    const double sigma3 = 3.0 * std::sqrt(pred.variance[i]);
    int lo = static_cast<int>(std::floor(d - sigma3));
    int hi = static_cast<int>(std::ceil(d + sigma3));
    lo = std::clamp(lo, 0, rig.d_max);
    hi = std::clamp(hi, 0, rig.d_max);
    if (hi - lo < 2) {
      --lo;
      ++hi;
      if (lo < 0) {
        hi = std::min(rig.d_max, hi - lo);
        lo = 0;
      } else if (hi > rig.d_max) {
        lo = std::max(0, lo - (hi - rig.d_max));
        hi = rig.d_max;
      }
    }
    out.set(i, lo, hi);
  }
  return out;
}

/// Ragged per-pixel cost storage over each pixel's interval.
class CostVolume {
 public:
  using Cost = std::int32_t;
  static constexpr Cost kInfinity = std::numeric_limits<Cost>::max() / 4;

  CostVolume() = default;
  explicit CostVolume(IntervalMap intervals) : intervals_(std::move(intervals)) {
    offsets_.resize(intervals_.size() + 1);
    std::size_t n = 0;
    for (std::size_t i = 0; i < intervals_.size(); ++i) {
      offsets_[i] = n;
      n += static_cast<std::size_t>(intervals_.count(i));
    }
    offsets_.back() = n;
    costs_.assign(n, 0);
  }

  const IntervalMap& intervals() const { return intervals_; }
  int width() const { return intervals_.width(); }
  int height() const { return intervals_.height(); }
  std::size_t size() const { return intervals_.size(); }
  std::size_t entries() const { return costs_.size(); }

  std::span<Cost> at(std::size_t i) {
    return {costs_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::span<const Cost> at(std::size_t i) const {
    return {costs_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  /// Cost at disparity d, +infinity outside the pixel's interval.
  Cost cost(int x, int y, int d) const {
    const std::size_t i = intervals_.index(x, y);
    if (!intervals_.contains(i, d)) return kInfinity;
    return costs_[offsets_[i] + static_cast<std::size_t>(d - intervals_.lo(i))];
  }
  void set(int x, int y, int d, Cost c) {
    const std::size_t i = intervals_.index(x, y);
    if (!intervals_.contains(i, d)) throw ContractViolation("disparity outside pixel interval");
    costs_[offsets_[i] + static_cast<std::size_t>(d - intervals_.lo(i))] = c;
  }

  bool operator==(const CostVolume&) const = default;

 private:
  IntervalMap intervals_;
  std::vector<std::size_t> offsets_;
  std::vector<Cost> costs_;
};

/// Cost assigned when the matched patch center falls off the other image.
inline CostVolume::Cost border_cost(const SgmParams& params) {
  return params.window * params.window * 255;
}

/// Windowed SAD between the reference patch at (x, y) and the other image's
/// patch at (other_column(view, x, d), y). Window samples are clamped to the
/// image; a patch center off the other image yields border_cost.
inline CostVolume::Cost patch_sad(const GrayImage& ref, const GrayImage& other, int x, int y,
                                  int d, int window, View view) {
  const int xo = other_column(view, x, d);
  if (xo < 0 || xo >= other.width()) return window * window * 255;
  const int r = window / 2;
  const int w = ref.width(), h = ref.height();
  CostVolume::Cost sum = 0;
  for (int dy = -r; dy <= r; ++dy) {
    const int yy = std::clamp(y + dy, 0, h - 1);
    for (int dx = -r; dx <= r; ++dx) {
      const int a = ref(std::clamp(x + dx, 0, w - 1), yy);
      const int b = other(std::clamp(xo + dx, 0, w - 1), yy);
      sum += std::abs(a - b);
    }
  }
  return sum;
}

inline CostVolume matching_cost(const GrayImage& ref, const GrayImage& other,
                                const IntervalMap& intervals, const SgmParams& params,
                                View view = View::left) {
  params.validate();
  if (!ref.same_shape(other) || !ref.same_shape(intervals.width(), intervals.height())) {
    throw ContractViolation("matching_cost: image/interval dimensions differ");
  }
  CostVolume vol(intervals);
  for (int y = 0; y < ref.height(); ++y) {
    for (int x = 0; x < ref.width(); ++x) {
      const std::size_t i = intervals.index(x, y);
      auto costs = vol.at(i);
      const int lo = intervals.lo(i);
      for (std::size_t k = 0; k < costs.size(); ++k) {
        costs[k] = patch_sad(ref, other, x, y, lo + static_cast<int>(k), params.window, view);
      }
    }
  }
  return vol;
}

/// The eight scan directions (dx, dy).
inline constexpr std::array<std::pair<int, int>, 8> kPathDirections{{
    {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}}};

namespace detail {

/// One path's L_r plane, written with the same layout as `vol`.
inline void aggregate_direction(const CostVolume& vol, int dx, int dy, int p1, int p2,
                                std::vector<CostVolume::Cost>& plane,
                                std::vector<std::size_t>& offsets,
                                std::vector<CostVolume::Cost>& minima) {
  using Cost = CostVolume::Cost;
  const auto& iv = vol.intervals();
  const int w = vol.width(), h = vol.height();
  const int y0 = dy >= 0 ? 0 : h - 1, y1 = dy >= 0 ? h : -1, ys = dy >= 0 ? 1 : -1;
  const int x0 = dx >= 0 ? 0 : w - 1, x1 = dx >= 0 ? w : -1, xs = dx >= 0 ? 1 : -1;

  for (int y = y0; y != y1; y += ys) {
    for (int x = x0; x != x1; x += xs) {
      const std::size_t i = iv.index(x, y);
      const auto raw = vol.at(i);
      Cost* out = plane.data() + offsets[i];
      const int lo = iv.lo(i);
      const int px = x - dx, py = y - dy;
      Cost best_here = CostVolume::kInfinity;

      if (px < 0 || py < 0 || px >= w || py >= h) {
        for (std::size_t k = 0; k < raw.size(); ++k) {
          out[k] = raw[k];
          best_here = std::min(best_here, out[k]);
        }
      } else {
        const std::size_t j = iv.index(px, py);
        const Cost* prev = plane.data() + offsets[j];
        const int plo = iv.lo(j), phi = iv.hi(j);
        const Cost prev_min = minima[j];
        const auto prev_at = [&](int d) {
          return (d >= plo && d <= phi) ? prev[d - plo] : CostVolume::kInfinity;
        };
        for (std::size_t k = 0; k < raw.size(); ++k) {
          const int d = lo + static_cast<int>(k);
          Cost best = prev_min + p2;
          best = std::min(best, prev_at(d));
          best = std::min(best, prev_at(d - 1) + p1);
          best = std::min(best, prev_at(d + 1) + p1);
          out[k] = raw[k] + best - prev_min;
          best_here = std::min(best_here, out[k]);
        }
      }
      minima[i] = best_here;
    }
  }
}

}  // namespace detail

/// Sums the eight path costs
///   L_r(p,d) = C(p,d) + min(L_r(p-r,d), L_r(p-r,d+-1) + P1, min L_r(p-r,.) + P2)
///              - min L_r(p-r,.)
inline CostVolume aggregate_paths(const CostVolume& vol, const SgmParams& params) {
  params.validate();
  CostVolume sum(vol.intervals());
  const std::size_t n = vol.size();
  std::vector<std::size_t> offsets(n + 1);
  {
    std::size_t acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      offsets[i] = acc;
      acc += vol.at(i).size();
    }
    offsets[n] = acc;
  }
  std::vector<CostVolume::Cost> plane(vol.entries());
  std::vector<CostVolume::Cost> minima(n);
  for (const auto& [dx, dy] : kPathDirections) {
    detail::aggregate_direction(vol, dx, dy, params.p1, params.p2, plane, offsets, minima);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sum.at(i);
      const CostVolume::Cost* l = plane.data() + offsets[i];
      for (std::size_t k = 0; k < s.size(); ++k) s[k] += l[k];
    }
  }
  return sum;
}

/// Index of the minimum cost, ties toward the smaller disparity; -1 if empty.
inline int argmin_cost(std::span<const CostVolume::Cost> costs) {
  if (costs.empty()) return -1;
  return static_cast<int>(std::min_element(costs.begin(), costs.end()) - costs.begin());
}

/// Winner-take-all over each pixel's interval. A winner of 0 (point at
/// infinity) or an empty interval leaves the pixel invalid.
inline DisparityMap select_disparity(const CostVolume& agg) {
  DisparityMap out(agg.width(), agg.height());
  for (std::size_t i = 0; i < agg.size(); ++i) {
    const int k = argmin_cost(agg.at(i));
    if (k < 0) continue;
    const int d = agg.intervals().lo(i) + k;
    if (d > 0) out.set(i, static_cast<double>(d));
  }
  return out;
}

/// Matching variance from the cost profile around the selected minimum.
/// Walking outward from `best` on either side, relative costs are summed
/// while the running sum stays below S_max; r is the number of disparities
/// counted on both sides, floored at r_min.
inline double matching_variance(std::span<const CostVolume::Cost> costs, int best,
                                const SgmParams& params) {
  if (best < 0 || best >= static_cast<int>(costs.size())) {
    throw ContractViolation("selected disparity outside the interval");
  }
  const double base = costs[best];
  int n_left = 0;
  double sum = 0.0;
  for (int k = best - 1; k >= 0; --k) {
    sum += costs[k] - base;
    if (!(sum < params.s_max)) break;
    ++n_left;
  }
  int n_right = 0;
  sum = 0.0;
  for (int k = best + 1; k < static_cast<int>(costs.size()); ++k) {
    sum += costs[k] - base;
    if (!(sum < params.s_max)) break;
    ++n_right;
  }
  return std::max(static_cast<double>(n_left + n_right), params.r_min);
}

/// Variance for every valid pixel of a selected map; zero elsewhere.
inline VarianceMap matching_variance_map(const CostVolume& agg, const DisparityMap& selected,
                                         const SgmParams& params) {
  VarianceMap out(agg.width(), agg.height());
  for (std::size_t i = 0; i < agg.size(); ++i) {
    if (!selected.valid(i)) continue;
    const int best = static_cast<int>(selected[i]) - agg.intervals().lo(i);
    out[i] = matching_variance(agg.at(i), best, params);
  }
  return out;
}

/// Left-right consistency. Returns keep masks (1 = consistent) for the left
/// and right maps.
inline std::pair<Mask, Mask> lr_consistency(const DisparityMap& left, const DisparityMap& right,
                                            double tau) {
  if (!left.values().same_shape(right.values())) {
    throw ContractViolation("lr_consistency: map dimensions differ");
  }
  const int w = left.width(), h = left.height();
  Mask keep_left(w, h, 0), keep_right(w, h, 0);
  const auto check = [&](const DisparityMap& ref, const DisparityMap& other, View view,
                         Mask& keep) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!ref.valid(x, y)) continue;
        const double d = ref(x, y);
        const int xo = other_column(view, x, static_cast<int>(std::lround(d)));
        if (xo < 0 || xo >= w || !other.valid(xo, y)) continue;
        if (std::abs(d - other(xo, y)) <= tau) keep(x, y) = 1;
      }
    }
  };
  check(left, right, View::left, keep_left);
  check(right, left, View::right, keep_right);
  return {std::move(keep_left), std::move(keep_right)};
}

/// Keeps (1) valid pixels whose windowed SAD at the rounded disparity is at
/// most tau_sad; off-image patches are rejected.
inline Mask sad_check(const GrayImage& ref, const GrayImage& other, const DisparityMap& d,
                      int window, double tau_sad, View view = View::left) {
  if (!ref.same_shape(other) || !ref.same_shape(d.values())) {
    throw ContractViolation("sad_check: dimensions differ");
  }
  Mask keep(d.width(), d.height(), 0);
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (!d.valid(x, y)) continue;
      const int di = static_cast<int>(std::lround(d(x, y)));
      const int xo = other_column(view, x, di);
      if (xo < 0 || xo >= d.width()) continue;
      if (patch_sad(ref, other, x, y, di, window, view) <= tau_sad) keep(x, y) = 1;
    }
  }
  return keep;
}

/// Output of one SGM pass for a single view.
struct Measurement {
  DisparityMap disparity;
  VarianceMap variance;
  IntervalMap intervals;
};

inline Measurement match_view(const GrayImage& ref, const GrayImage& other,
                              const IntervalMap& intervals, const SgmParams& params, View view) {
  const CostVolume agg = aggregate_paths(matching_cost(ref, other, intervals, params, view), params);
  Measurement m;
  m.disparity = select_disparity(agg);
  m.variance = matching_variance_map(agg, m.disparity, params);
  m.intervals = intervals;
  return m;
}

}  // namespace egosgm
