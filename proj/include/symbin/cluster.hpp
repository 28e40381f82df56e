#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "symbin/object_model.hpp"
#include "symbin/so3.hpp"
#include "symbin/types.hpp"

namespace symbin {

// ---------------------------------------------------------------------------
// Flat-kernel mean shift
// ---------------------------------------------------------------------------

struct MeanShiftParams {
  double bandwidth = 1.0;
  double min_points = 1.0;  // compared against the (weighted) member count
  int max_iters = 300;
  double tol = 1e-3;
};

struct MeanShiftCluster {
  Eigen::VectorXd mode;
  std::vector<std::size_t> members;  // ascending feature indices
  double weight = 0.0;               // sum of member weights
};

struct MeanShiftResult {
  std::vector<MeanShiftCluster> clusters;
  std::vector<int> labels;  // cluster index per feature, -1 = unassigned
};

/// Mean shift with a flat kernel over the columns of `features` (k x N).
///
/// Seeds are one representative feature per grid cell of side bandwidth/2 (the
/// member closest to the cell mean, lowest index on ties). Each seed moves to
/// the weighted mean of the features within `bandwidth` until the shift drops
/// below `tol` or `max_iters` is reached. Converged modes are visited in order
/// of decreasing density and dropped when within bandwidth/2 of a kept mode.
/// Every feature joins its nearest kept mode when that mode is within
/// `bandwidth`; clusters lighter than `min_points` are discarded and their
/// members left unassigned. `weights` defaults to 1 per feature.
MeanShiftResult mean_shift(const Eigen::MatrixXd& features, const MeanShiftParams& params,
                           std::span<const double> weights = {});

// ---------------------------------------------------------------------------
// Two-stage clustering and pose voting
// ---------------------------------------------------------------------------

/// Per-point network output for one scene.
struct PerPointPrediction {
  PointCloud positions;
  PointCloud centroids;
  std::vector<Quaternion> quats;

  std::size_t size() const { return positions.size(); }
  void validate() const;
};

struct ClusterParams {
  double bandwidth_1 = 5.0;   // normalized mm
  double bandwidth_2 = 2.5;   // normalized mm
  double min_points_1 = 20;
  double min_points_2 = 50;
  double quat_scale = 20.0;   // mm per unit quaternion distance
  int max_iters = 300;
  double convergence_tol = 1e-3;

  void validate() const;
};

struct Stage1Cluster {
  std::vector<std::size_t> members;
  Vec3 mean_centroid = Vec3::Zero();
  Quaternion representative;
};

struct InstanceEstimate {
  Pose pose;
  std::vector<std::size_t> members;       // ascending point indices
  std::vector<std::size_t> stage1_ids;    // merged stage-1 clusters
};

struct ClusterResult {
  std::vector<Stage1Cluster> stage1;
  std::vector<InstanceEstimate> instances;
  std::vector<int> labels;  // instance id per point, -1 = unassigned
  bool no_clusters = false;
};

/// Rows: predicted centroid (3) then quat_scale * canonical quaternion (4).
Eigen::MatrixXd stage1_features(const PerPointPrediction& pred, double quat_scale);

/// Count-weighted mean of the merged stage-1 centroids, and the stage-1
/// representative whose summed symmetry-aware distance to the member
/// quaternions is smallest.
Pose pose_vote(std::span<const std::size_t> stage1_ids, std::span<const Stage1Cluster> stage1,
               const PerPointPrediction& pred, const ObjectModel& model);

/// Stage 1 on joint (centroid, rotation) features, stage 2 on stage-1 centroids,
/// then pose voting per instance.
ClusterResult two_stage_pipeline(const PerPointPrediction& pred, const ClusterParams& params,
                                 const ObjectModel& model);

/// Ablation path: translation-only clustering with bandwidth_1/min_points_1 and
/// the sign-aligned average of member quaternions as rotation.
ClusterResult single_stage_pipeline(const PerPointPrediction& pred, const ClusterParams& params);

/// Sign-aligned arithmetic mean of quaternions, renormalized.
Quaternion average_quaternion(std::span<const Quaternion> quats);

// ---------------------------------------------------------------------------
// ICP refinement
// ---------------------------------------------------------------------------

struct IcpParams {
  int max_iters = 50;
  double tol = 1e-10;  // stop when the mean squared error improves by less (mm^2)
};

struct IcpResult {
  Pose pose;
  bool failed = false;
  int iterations = 0;
  /// Mean squared correspondence distance before each iteration, plus the final value.
  std::vector<double> errors;
};

/// Point-to-point ICP: nearest model point per scene point, Kabsch update.
/// A rank-deficient cross-covariance marks the result failed and returns init.
IcpResult icp_refine(const PointCloud& scene_points, const PointCloud& model, const Pose& init,
                     const IcpParams& params = {});

}  // namespace symbin
