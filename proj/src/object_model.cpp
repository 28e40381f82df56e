#include "symbin/object_model.hpp"

#include <algorithm>

#include "symbin/workspace.hpp"

namespace symbin {

ObjectModel ObjectModel::make(std::string name, PointCloud cloud,
                              const SymmetryDescriptor& symmetry) {
  if (cloud.empty()) throw InvalidArgument("object model '" + name + "' has no points");
  ObjectModel m;
  m.name = std::move(name);
  const Vec3 c = centroid(cloud);
  for (auto& p : cloud) p -= c;
  m.cloud = std::move(cloud);
  m.symmetry = symmetry;
  m.group = build_symmetry_group(symmetry);
  m.mask = build_axis_mask(symmetry);
  m.bbox = bounding_box_extent(m.cloud);
  for (const auto& p : m.cloud) m.bounding_radius = std::max(m.bounding_radius, p.norm());
  return m;
}

PointCloud subsample(const PointCloud& cloud, std::size_t max_points) {
  if (max_points == 0 || cloud.size() <= max_points) return cloud;
  const std::size_t stride = (cloud.size() + max_points - 1) / max_points;
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); i += stride) out.push_back(cloud[i]);
  return out;
}

}  // namespace symbin
