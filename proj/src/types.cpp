#include "symbin/types.hpp"

namespace symbin {

Vec3 centroid(const PointCloud& cloud) {
  if (cloud.empty()) throw InvalidArgument("centroid of empty point cloud");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : cloud) sum += p;
  return sum / static_cast<double>(cloud.size());
}

}  // namespace symbin
