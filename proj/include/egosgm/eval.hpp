// Disparity quality metrics and search-space statistics.
#pragma once

#include "egosgm/core.hpp"
#include "egosgm/io_kitti.hpp"
#include "egosgm/sgm.hpp"

#include <cmath>
#include <string>

namespace egosgm {

/// `either`: bad if the error exceeds 3 px OR 5 % of the ground truth.
/// `both`: bad only if it exceeds both (the KITTI 2015 devkit rule).
enum class BadPixelRule { either, both };

inline std::string to_string(BadPixelRule rule) { return rule == BadPixelRule::either ? "or" : "and"; }

inline BadPixelRule parse_bad_pixel_rule(const std::string& s) {
  if (s == "or") return BadPixelRule::either;
  if (s == "and") return BadPixelRule::both;
  throw ParseError("metric mode must be 'or' or 'and', got '" + s + "'");
}

inline bool is_bad_pixel(double estimate, double truth, BadPixelRule rule) {
  const double e = std::abs(estimate - truth);
  const bool abs_bad = e > 3.0;
  const bool rel_bad = e > 0.05 * truth;
  return rule == BadPixelRule::either ? (abs_bad || rel_bad) : (abs_bad && rel_bad);
}

struct BadPixelStats {
  double rate = 0.0;      // bad / (GT-valid and estimate-valid)
  double rate_all = 0.0;  // (bad + missing) / GT-valid
  double density = 0.0;   // estimate-valid / GT-valid
  std::size_t ground_truth = 0;
  std::size_t evaluated = 0;
  std::size_t bad = 0;
};

inline BadPixelStats bad_pixel_rate(const DisparityMap& estimate, const DisparityMap& truth,
                                    BadPixelRule rule = BadPixelRule::either) {
  if (!estimate.values().same_shape(truth.values())) {
    throw ContractViolation("bad_pixel_rate: dimensions differ");
  }
  BadPixelStats s;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!truth.valid(i)) continue;
    ++s.ground_truth;
    if (!estimate.valid(i)) continue;
    ++s.evaluated;
    if (is_bad_pixel(estimate[i], truth[i], rule)) ++s.bad;
  }
  if (s.evaluated > 0) s.rate = static_cast<double>(s.bad) / static_cast<double>(s.evaluated);
  if (s.ground_truth > 0) {
    const auto missing = s.ground_truth - s.evaluated;
    s.rate_all = static_cast<double>(s.bad + missing) / static_cast<double>(s.ground_truth);
    s.density = static_cast<double>(s.evaluated) / static_cast<double>(s.ground_truth);
  }
  return s;
}

/// Fraction of the full W x H x (d_max + 1) volume actually searched.
inline double search_space_fraction(const IntervalMap& intervals) {
  const double full = static_cast<double>(intervals.size()) * (intervals.d_max() + 1);
  return static_cast<double>(intervals.total_count()) / full;
}

inline double density(const DisparityMap& d) {
  if (d.size() == 0) return 0.0;
  return static_cast<double>(d.valid_count()) / static_cast<double>(d.size());
}

/// Red for bad, blue for good, black where either map is invalid.
inline RgbImage error_image(const DisparityMap& estimate, const DisparityMap& truth,
                            BadPixelRule rule = BadPixelRule::either) {
  if (!estimate.values().same_shape(truth.values())) {
    throw ContractViolation("error_image: dimensions differ");
  }
  RgbImage out(truth.width(), truth.height(), {0, 0, 0});
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!truth.valid(i) || !estimate.valid(i)) continue;
    out[i] = is_bad_pixel(estimate[i], truth[i], rule) ? std::array<std::uint8_t, 3>{255, 0, 0}
                                                       : std::array<std::uint8_t, 3>{0, 0, 255};
  }
  return out;
}

}  // namespace egosgm
