#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "symbin/types.hpp"

namespace symbin::detail {

/// Static 3-D k-d tree for exact nearest-neighbor queries.
class KdTree3 {
 public:
  explicit KdTree3(const PointCloud& points) : points_(points), order_(points.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    build(0, order_.size(), 0);
  }

  /// Index of the nearest point (lowest index on exact ties) and squared distance.
  std::pair<std::size_t, double> nearest(const Vec3& q) const {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    search(0, order_.size(), 0, q, best, best_d2);
    return {best, best_d2};
  }

 private:
  void build(std::size_t lo, std::size_t hi, int axis) {
    if (hi - lo <= 1) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::size_t a, std::size_t b) {
                       return points_[a][axis] < points_[b][axis] ||
                              (points_[a][axis] == points_[b][axis] && a < b);
                     });
    build(lo, mid, (axis + 1) % 3);
    build(mid + 1, hi, (axis + 1) % 3);
  }

  void search(std::size_t lo, std::size_t hi, int axis, const Vec3& q, std::size_t& best,
              double& best_d2) const {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::size_t idx = order_[mid];
    const double d2 = (points_[idx] - q).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
      best = idx;
      best_d2 = d2;
    }
    const double diff = q[axis] - points_[idx][axis];
    const int next = (axis + 1) % 3;
    if (diff <= 0) {
      search(lo, mid, next, q, best, best_d2);
      if (diff * diff <= best_d2) search(mid + 1, hi, next, q, best, best_d2);
    } else {
      search(mid + 1, hi, next, q, best, best_d2);
      if (diff * diff <= best_d2) search(lo, mid, next, q, best, best_d2);
    }
  }

  PointCloud points_;
  std::vector<std::size_t> order_;
};

}  // namespace symbin::detail
