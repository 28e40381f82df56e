#include "symbin/workspace.hpp"

namespace symbin {

Vec3 bounding_box_extent(const PointCloud& cloud) {
  if (cloud.empty()) throw InvalidArgument("bounding box of empty point cloud");
  Vec3 lo = cloud.front();
  Vec3 hi = cloud.front();
  for (const auto& p : cloud) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return hi - lo;
}

NormalizationTransform fit_normalization(const PointCloud& model) {
  if (model.empty()) throw InvalidArgument("cannot normalize an empty model");
  const double longest = bounding_box_extent(model).maxCoeff();
  if (!(longest > 0.0)) throw InvalidArgument("model bounding box has zero extent");
  return {kWorkpieceCubeMm / longest, Vec3::Zero()};
}

NormalizedScene normalize_scene(const PointCloud& scene_cloud, const NormalizationTransform& t) {
  NormalizedScene out;
  out.transform.scale = t.scale;
  out.transform.scene_offset = centroid(scene_cloud);
  out.points.reserve(scene_cloud.size());
  for (const auto& p : scene_cloud) out.points.push_back(out.transform.to_normalized(p));
  return out;
}

PointCloud scale_cloud(const PointCloud& cloud, double scale) {
  PointCloud out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(p * scale);
  return out;
}

Pose normalize_pose(const Pose& p, const NormalizationTransform& t) {
  return {p.rotation, t.to_normalized(p.translation)};
}

Pose denormalize_pose(const Pose& p, const NormalizationTransform& t) {
  return {p.rotation, t.to_scene(p.translation)};
}

}  // namespace symbin
