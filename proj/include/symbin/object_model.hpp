#pragma once

#include <string>

#include "symbin/so3.hpp"
#include "symbin/types.hpp"

namespace symbin {

/// A rigid object: sampled surface cloud in its own frame (centroid at the
/// origin) together with its symmetry description.
struct ObjectModel {
  std::string name;
  PointCloud cloud;
  SymmetryDescriptor symmetry;
  SymmetryGroup group;
  AxisMask mask;
  Vec3 bbox = Vec3::Zero();
  double bounding_radius = 0.0;

  /// Recenters `cloud` on its centroid and derives S, v and the bounding data.
  static ObjectModel make(std::string name, PointCloud cloud, const SymmetryDescriptor& symmetry);
};

/// Every `stride`-th point such that at most `max_points` remain.
PointCloud subsample(const PointCloud& cloud, std::size_t max_points);

}  // namespace symbin
