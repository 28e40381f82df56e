#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "symbin/so3.hpp"
#include "symbin/types.hpp"

namespace symbin {

struct LossWeights {
  double w_r = 1.0;
  double w_t = 1.0;

  void validate() const;
};

/// Ground truth of one instance plus the object it is an instance of.
struct InstanceTarget {
  Mat3 rotation = Mat3::Identity();  // R_gt
  Vec3 centroid = Vec3::Zero();      // T_gt, mm
  std::shared_ptr<const PointCloud> model;
  SymmetryGroup group;
  AxisMask mask;
};

/// One scene point: its position, the instance it belongs to and the network's
/// per-point centroid and (unnormalized) quaternion predictions.
struct PointTarget {
  std::size_t instance = 0;
  Vec3 position = Vec3::Zero();
  Vec3 pred_centroid = Vec3::Zero();
  Vec4 pred_quat{1.0, 0.0, 0.0, 0.0};  // (w, x, y, z)
};

struct InstanceTargets {
  std::vector<InstanceTarget> instances;
  std::vector<PointTarget> points;

  /// Throws InvalidArgument on an empty set, a dangling instance id, a missing
  /// model or a zero quaternion.
  void validate() const;
};

/// Per-point weights in [0.5, 1.5], linear in distance to the centroid; all 1.0
/// when every point is (within 1e-9 mm) equidistant.
std::vector<double> center_weights(const PointCloud& instance_points, const Vec3& centroid);

/// Mean over instances of the symmetry-minimized mean point distance between
/// the masked model under R_gt * s and under each point's predicted rotation.
double rotation_loss(const InstanceTargets& targets);

/// Mean over instances of the center-weighted mean centroid error.
double translation_loss(const InstanceTargets& targets);

double total_loss(const InstanceTargets& targets, const LossWeights& weights);

enum class LossKind { rotation, translation, total };

/// Gradient w.r.t. every point's predicted centroid and raw quaternion.
struct LossGradient {
  std::vector<Vec3> centroid;
  std::vector<Vec4> quat;

  double max_abs() const;
};

double evaluate_loss(LossKind kind, const InstanceTargets& targets,
                     const LossWeights& weights = {});

/// The minimizing symmetry element of some instance is within 1e-6 mm of the
/// runner-up, so the loss is not differentiable there. Callers resample.
class SymmetryTie : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Analytic gradient. Throws SymmetryTie for rotation terms evaluated at a tie.
LossGradient loss_gradient(LossKind kind, const InstanceTargets& targets,
                           const LossWeights& weights = {});

/// Central finite differences with step epsilon on every prediction component.
LossGradient numeric_gradient(LossKind kind, const InstanceTargets& targets, double epsilon,
                              const LossWeights& weights = {});

struct GradcheckResult {
  double loss = 0.0;
  double max_rel_err = 0.0;
};

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over all
/// gradient components. Throws SymmetryTie at a tie of the min over S.
GradcheckResult gradcheck(LossKind kind, const InstanceTargets& targets, double epsilon,
                          const LossWeights& weights = {});

/// Shape of the random configurations used for gradient checking.
struct RandomTargetSpec {
  std::size_t max_instances = 3;
  std::size_t max_points_per_instance = 6;
  std::size_t model_points = 24;
  double model_extent_mm = 40.0;
  double centroid_noise_mm = 4.0;
  double rotation_noise_deg = 40.0;
  /// Predicted rotations are redrawn until every model point moves by at least
  /// this fraction of its masked radius under every element of S, keeping the
  /// point norms away from their non-differentiable zero.
  double min_relative_error = 0.05;
  /// Instances are redrawn until the best and second-best element of S differ
  /// by at least this much in mean point distance.
  double min_symmetry_gap_mm = 1e-3;
};

/// Random targets over a mix of symmetry descriptors (none, 2-fold, 4-fold,
/// dihedral, infinite z).
InstanceTargets random_targets(std::mt19937_64& rng, const RandomTargetSpec& spec = {});

}  // namespace symbin
