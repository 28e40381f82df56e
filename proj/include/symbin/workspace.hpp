#pragma once

#include "symbin/so3.hpp"
#include "symbin/types.hpp"

namespace symbin {

/// Maps scene millimeters into the normalized workpiece space:
/// p_norm = (p - scene_offset) * scale.
struct NormalizationTransform {
  double scale = 1.0;
  Vec3 scene_offset = Vec3::Zero();

  Vec3 to_normalized(const Vec3& p) const { return (p - scene_offset) * scale; }
  Vec3 to_scene(const Vec3& p) const { return p / scale + scene_offset; }
};

/// Side length of the cube every model is scaled into.
inline constexpr double kWorkpieceCubeMm = 100.0;

/// Scale part only: 100 / longest axis-aligned bounding-box edge of the model.
NormalizationTransform fit_normalization(const PointCloud& model);

Vec3 bounding_box_extent(const PointCloud& cloud);

struct NormalizedScene {
  PointCloud points;
  NormalizationTransform transform;  // scale from the input, offset = scene centroid
};

/// Recenters the scene on its centroid and applies the transform's scale.
NormalizedScene normalize_scene(const PointCloud& scene_cloud, const NormalizationTransform& t);

PointCloud scale_cloud(const PointCloud& cloud, double scale);

Pose normalize_pose(const Pose& p, const NormalizationTransform& t);
Pose denormalize_pose(const Pose& p, const NormalizationTransform& t);

}  // namespace symbin
