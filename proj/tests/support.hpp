#pragma once

// Hand-rolled generators and independent reference implementations used by
// the property tests.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <array>
#include <random>
#include <vector>

#include "symbin/so3.hpp"

namespace testing {

using symbin::Mat3;
using symbin::PointCloud;
using symbin::Pose;
using symbin::Vec3;
using symbin::Vec4;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline Vec4 unit_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec4 q;
  do {
    q = Vec4(g(rng), g(rng), g(rng), g(rng));
  } while (q.norm() < 1e-6);
  return q.normalized();
}

/// Rodrigues: R = I + sin(t) K + (1 - cos(t)) K^2.
inline Mat3 rodrigues(const Vec3& axis, double degrees) {
  const Vec3 k = axis.normalized();
  Mat3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  const double t = degrees * std::numbers::pi / 180.0;
  return Mat3::Identity() + std::sin(t) * kx + (1.0 - std::cos(t)) * kx * kx;
}

/// Textbook expansion of the rotation matrix of a unit quaternion.
inline Mat3 quat_matrix_reference(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  return quat_matrix_reference(unit_quat(rng));
}

inline Pose random_pose(std::mt19937_64& rng, double extent = 200.0) {
  return Pose::from_matrix(random_rotation(rng),
                           Vec3(uniform(rng, -extent, extent), uniform(rng, -extent, extent),
                                uniform(rng, -extent, extent)));
}

inline PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double half_extent) {
  PointCloud out;
  for (std::size_t i = 0; i < n; ++i) {
    out.emplace_back(uniform(rng, -half_extent, half_extent), uniform(rng, -half_extent, half_extent),
                     uniform(rng, -half_extent, half_extent));
  }
  return out;
}

/// Mean of per-point distances for one fixed symmetry element, written out directly.
inline double masked_mean_distance(const PointCloud& model, const Mat3& r_gt, const Mat3& s,
                                   const Vec3& t_gt, const Mat3& r_pred, const Vec3& t_pred,
                                   const Vec3& v) {
  double sum = 0.0;
  for (const auto& m : model) {
    const Vec3 mv(m.x() * v.x(), m.y() * v.y(), m.z() * v.z());
    const Vec3 a = r_gt * (s * mv) + t_gt;
    const Vec3 b = r_pred * mv + t_pred;
    sum += std::sqrt((a - b).squaredNorm());
  }
  return sum / static_cast<double>(model.size());
}

/// Brute force over an explicit list of symmetry matrices.
inline double brute_force_distance(const PointCloud& model, const Pose& gt, const Pose& pred,
                                   const std::vector<Mat3>& group, const Vec3& v) {
  double best = INFINITY;
  for (const auto& s : group) {
    best = std::min(best, masked_mean_distance(model, gt.matrix(), s, gt.translation,
                                               pred.matrix(), pred.translation, v));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Kernel density mode search on a grid. A flat-kernel mean shift converges to
// stationary points of the density built from its shadow, the Epanechnikov
// kernel: f(x) = sum_i max(0, 1 - |x - x_i|^2 / h^2).
// ---------------------------------------------------------------------------

template <int D>
using GridPoint = std::array<double, D>;

template <int D>
double epanechnikov_density(const GridPoint<D>& x, const std::vector<GridPoint<D>>& pts, double h) {
  double f = 0.0;
  for (const auto& p : pts) {
    double d2 = 0.0;
    for (int k = 0; k < D; ++k) d2 += (x[k] - p[k]) * (x[k] - p[k]);
    f += std::max(0.0, 1.0 - d2 / (h * h));
  }
  return f;
}

struct GridMode {
  std::vector<double> x;
  double density = 0.0;
};

/// Argmax of the density on a grid of spacing `step` within +-`radius` of
/// `center`, refined by successively finer grids down to `final_step`. Returns
/// nothing when the argmax lies on the window border (no interior maximum).
template <int D>
std::optional<GridMode> refine_mode(GridPoint<D> center, const std::vector<GridPoint<D>>& pts,
                                    double h, double radius, double step, double final_step) {
  while (true) {
    const int n = static_cast<int>(std::lround(radius / step));
    GridPoint<D> best = center;
    double best_f = -1.0;
    bool on_border = false;
    std::array<int, D> idx;
    idx.fill(-n);
    while (true) {
      GridPoint<D> x;
      bool border = false;
      for (int k = 0; k < D; ++k) {
        x[k] = center[k] + idx[k] * step;
        border = border || std::abs(idx[k]) == n;
      }
      const double f = epanechnikov_density<D>(x, pts, h);
      if (f > best_f) {
        best_f = f;
        best = x;
        on_border = border;
      }
      int k = 0;
      while (k < D && ++idx[k] > n) idx[k++] = -n;
      if (k == D) break;
    }
    if (on_border || best_f <= 0.0) return std::nullopt;
    center = best;
    if (step <= final_step) break;
    radius = 2.0 * step;
    step = std::max(final_step, step / 10.0);
  }
  GridMode out;
  out.x.assign(center.begin(), center.end());
  out.density = epanechnikov_density<D>(center, pts, h);
  return out;
}

/// All local maxima of the density: strict grid maxima on a coarse grid of
/// spacing `coarse` (compared to their 3^D neighbours), each refined to `fine`.
template <int D>
std::vector<GridMode> grid_modes(const std::vector<GridPoint<D>>& pts, double h, double coarse,
                                 double fine) {
  GridPoint<D> lo, hi;
  lo.fill(INFINITY);
  hi.fill(-INFINITY);
  for (const auto& p : pts) {
    for (int k = 0; k < D; ++k) {
      lo[k] = std::min(lo[k], p[k] - h);
      hi[k] = std::max(hi[k], p[k] + h);
    }
  }
  std::array<int, D> size;
  for (int k = 0; k < D; ++k) size[k] = static_cast<int>(std::ceil((hi[k] - lo[k]) / coarse)) + 1;
  std::size_t total = 1;
  for (int k = 0; k < D; ++k) total *= static_cast<std::size_t>(size[k]);
  std::vector<double> f(total);
  const auto flat = [&](const std::array<int, D>& i) {
    std::size_t o = 0;
    for (int k = D - 1; k >= 0; --k) o = o * static_cast<std::size_t>(size[k]) + static_cast<std::size_t>(i[k]);
    return o;
  };
  const auto point_at = [&](const std::array<int, D>& i) {
    GridPoint<D> x;
    for (int k = 0; k < D; ++k) x[k] = lo[k] + i[k] * coarse;
    return x;
  };
  const auto for_each_index = [&](auto&& visit) {
    std::array<int, D> i;
    i.fill(0);
    while (true) {
      visit(i);
      int k = 0;
      while (k < D && ++i[k] >= size[k]) i[k++] = 0;
      if (k == D) break;
    }
  };
  for_each_index([&](const std::array<int, D>& i) { f[flat(i)] = epanechnikov_density<D>(point_at(i), pts, h); });

  std::vector<GridMode> out;
  for_each_index([&](const std::array<int, D>& i) {
    const double fi = f[flat(i)];
    if (fi <= 0.0) return;
    bool is_max = true;
    int span = 1;
    for (int k = 0; k < D; ++k) span *= 3;
    for (int code = 0; code < span && is_max; ++code) {
      std::array<int, D> j = i;
      int rest = code;
      bool self = true;
      for (int k = 0; k < D; ++k) {
        const int off = rest % 3 - 1;
        rest /= 3;
        j[k] += off;
        self = self && off == 0;
      }
      if (self) continue;
      bool inside = true;
      for (int k = 0; k < D; ++k) inside = inside && j[k] >= 0 && j[k] < size[k];
      if (!inside) continue;
      // Ties broken towards the lower flat index so plateaus yield one maximum.
      const double fj = f[flat(j)];
      if (fj > fi || (fj == fi && flat(j) < flat(i))) is_max = false;
    }
    if (!is_max) return;
    if (auto m = refine_mode<D>(point_at(i), pts, h, 2.0 * coarse, coarse / 2.0, fine)) {
      const bool dup = std::any_of(out.begin(), out.end(), [&](const GridMode& o) {
        double d2 = 0.0;
        for (int k = 0; k < D; ++k) d2 += (o.x[k] - m->x[k]) * (o.x[k] - m->x[k]);
        return d2 < 100.0 * fine * fine;
      });
      if (!dup) out.push_back(*m);
    }
  });
  return out;
}

}  // namespace testing
