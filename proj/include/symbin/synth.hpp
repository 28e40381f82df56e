#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "symbin/cluster.hpp"
#include "symbin/object_model.hpp"
#include "symbin/so3.hpp"
#include "symbin/workspace.hpp"

namespace symbin {

// ---------------------------------------------------------------------------
// Built-in object models
// ---------------------------------------------------------------------------

/// Surface of an axis-aligned box centered at the origin, each face sampled on
/// a regular grid that is mirror-symmetric about the face center.
PointCloud sample_box_surface(const Vec3& size, double pitch);

/// 10 x 10 x 400 mm box along x, 2 mm pitch. Square cross-section gives a
/// dihedral group of order 8 (90 deg about x, 180 deg about y).
ObjectModel rod_model(double pitch = 2.0);
/// 60 x 30 x 20 mm block with a centered 20 x 10 x 10 mm cap on +z: 180 deg about z only.
ObjectModel two_fold_model(double pitch = 2.0);
/// 40 x 40 x 10 mm plate with a centered 10 x 10 x 10 mm cap on +z: 90 deg about z.
ObjectModel four_fold_model(double pitch = 2.0);
/// Cylinder r = 15 mm, h = 60 mm on a 25 mm base disk: infinite symmetry about z.
ObjectModel candlestick_model(double pitch = 2.0);
/// Lumpy ellipsoid with no rotational symmetry.
ObjectModel blob_model(std::size_t points = 600);

/// Looks up a built-in model by name: rod, two_fold, four_fold, candlestick, blob.
ObjectModel builtin_model(const std::string& name);

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

struct SceneGenParams {
  std::size_t min_instances = 4;
  std::size_t max_instances = 8;
  Vec3 bin_extent{400.0, 400.0, 300.0};  // x, y width centered on 0; z height above the floor
  std::size_t placement_attempts = 200;
  double occlusion_cell = 3.0;      // mm
  double depth_tolerance = 4.0;     // mm
  std::uint64_t seed = 1;

  void validate() const;
};

struct SceneInstance {
  Pose gt;
  std::vector<std::size_t> visible;  // model point indices kept in the scene cloud
  std::size_t visible_count = 0;
};

struct Scene {
  std::vector<SceneInstance> instances;
  PointCloud cloud;
  std::vector<int> labels;                // instance id per scene point
  std::vector<std::size_t> model_index;   // model point per scene point
  std::uint64_t seed = 0;
  NormalizationTransform normalization;
  Vec3 bin_extent = Vec3::Zero();

  std::vector<Pose> gt_poses() const;
  std::vector<std::size_t> visible_counts() const;
  /// Scene points labelled with `instance`.
  PointCloud instance_points(std::size_t instance) const;
};

/// Places instances with random yaw/pitch/roll and xy inside the bin, each at
/// the lowest height where its bounding sphere overlaps no earlier one. Every
/// model point is visible. Throws GenerationFailed when nothing fits.
Scene generate_scene(const ObjectModel& model, const SceneGenParams& params);

/// Top-down occlusion: per xy cell keep points within `depth_tolerance` of the
/// highest point in that cell.
Scene apply_occlusion(const Scene& scene, double cell, double depth_tolerance);

/// Two instances of `rod` lying flat, centers `separation` mm apart along y and
/// long axes `angle_deg` apart in the xy plane.
Scene make_crossing_rods_scene(const ObjectModel& rod, double separation, double angle_deg);

/// Builds a Scene from explicit poses (all points visible).
Scene scene_from_poses(const ObjectModel& model, const std::vector<Pose>& poses,
                       const Vec3& bin_extent = Vec3(400.0, 400.0, 300.0));

// ---------------------------------------------------------------------------
// Oracle predictor
// ---------------------------------------------------------------------------

struct OracleParams {
  double sigma_t = 0.0;            // mm, per axis
  double sigma_r_deg = 0.0;        // rotation noise angle std-dev
  bool symmetric_ambiguity = false;  // per-point uniform element of S
  bool infinite_spin = false;        // per-point random spin about an infinite axis
  double outlier_fraction = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Emulated per-point network output for every scene point.
PerPointPrediction oracle_predict(const Scene& scene, const ObjectModel& model,
                                  const OracleParams& params);

/// Rotation with a uniformly random axis and the given angle.
Mat3 random_axis_rotation(std::mt19937_64& rng, double degrees);
Mat3 random_rotation(std::mt19937_64& rng);

}  // namespace symbin
