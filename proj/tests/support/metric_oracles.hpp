#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cardiosynth/core/types.hpp"

namespace testsupport {

inline double brute_dice(const cardiosynth::Grid3<std::uint8_t>& a, const cardiosynth::Grid3<std::uint8_t>& b) {
  double na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a.values()[i] != 0;
    nb += b.values()[i] != 0;
    both += a.values()[i] && b.values()[i];
  }
  return na + nb == 0 ? 1.0 : 2.0 * both / (na + nb);
}

struct Point {
  double z, y, x;
};

inline std::vector<Point> points(const cardiosynth::Grid3<std::uint8_t>& m, const cardiosynth::Spacing& sp) {
  std::vector<Point> out;
  const auto s = m.shape();
  for (int k = 0; k < s.slices; ++k)
    for (int r = 0; r < s.rows; ++r)
      for (int c = 0; c < s.cols; ++c)
        if (m(k, r, c)) out.push_back({k * sp.slice_mm, r * sp.row_mm, c * sp.col_mm});
  return out;
}

inline double directed(const std::vector<Point>& a, const std::vector<Point>& b) {
  double worst = 0.0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) {
      const double d = (p.z - q.z) * (p.z - q.z) + (p.y - q.y) * (p.y - q.y) + (p.x - q.x) * (p.x - q.x);
      best = std::min(best, d);
    }
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

// All-pairs symmetric Hausdorff; empty conventions: both -> 0, one -> image diagonal.
inline double brute_hausdorff(const cardiosynth::Grid3<std::uint8_t>& a, const cardiosynth::Grid3<std::uint8_t>& b,
                              const cardiosynth::Spacing& sp) {
  const auto pa = points(a, sp), pb = points(b, sp);
  if (pa.empty() && pb.empty()) return 0.0;
  if (pa.empty() || pb.empty()) {
    const auto s = a.shape();
    return std::sqrt(std::pow(s.slices * sp.slice_mm, 2) + std::pow(s.rows * sp.row_mm, 2) +
                     std::pow(s.cols * sp.col_mm, 2));
  }
  return std::max(directed(pa, pb), directed(pb, pa));
}

}  // namespace testsupport
