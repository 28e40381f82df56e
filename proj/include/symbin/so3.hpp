#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "symbin/types.hpp"

namespace symbin {

/// Unit quaternion (w, x, y, z) kept in canonical sign: w >= 0, and when w == 0
/// the first nonzero vector component is positive. q and -q therefore share one
/// representative.
class Quaternion {
 public:
  Quaternion() = default;

  /// Normalizes and canonicalizes; throws InvalidArgument on a (near) zero vector.
  static Quaternion normalized(double w, double x, double y, double z);
  static Quaternion normalized(const Vec4& wxyz) {
    return normalized(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
  }
  /// Accepts input already unit-norm within 1e-6, else InvalidArgument. Input
  /// within 1e-12 of unit norm is kept bit for bit (sign canonicalized only).
  static Quaternion from_unit(const Vec4& wxyz);
  static Quaternion identity() { return {}; }

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }
  Vec4 coeffs() const { return {w_, x_, y_, z_}; }

  bool operator==(const Quaternion&) const = default;

 private:
  Quaternion(double w, double x, double y, double z) : w_(w), x_(x), y_(y), z_(z) {}

  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

/// Applies the sign convention to a 4-vector without changing its norm.
Vec4 canonicalize_sign(const Vec4& wxyz);

Mat3 quat_to_matrix(const Quaternion& q);
/// Raw overload for unvalidated input; rejects norms off by more than 1e-6.
Mat3 quat_to_matrix(const Vec4& wxyz);
/// Shepperd's method. Rejects matrices that are not proper rotations within 1e-6.
Quaternion matrix_to_quat(const Mat3& rotation);

bool is_rotation(const Mat3& m, double tol);

/// Rotation of `degrees` about a unit axis.
Mat3 axis_angle_matrix(const Vec3& axis, double degrees);
/// Geodesic angle of a rotation matrix, in degrees within [0, 180].
double rotation_angle_deg(const Mat3& rotation);

struct Pose {
  Quaternion rotation;
  Vec3 translation = Vec3::Zero();

  Mat3 matrix() const { return quat_to_matrix(rotation); }
  Vec3 apply(const Vec3& p) const { return matrix() * p + translation; }
  static Pose from_matrix(const Mat3& r, const Vec3& t) { return {matrix_to_quat(r), t}; }
};

/// Per-axis step angles of rotational symmetry (0 = none) and the step below
/// which an axis counts as infinitely symmetric.
struct SymmetryDescriptor {
  double dx_deg = 0.0;
  double dy_deg = 0.0;
  double dz_deg = 0.0;
  double ts_deg = 15.0;

  std::array<double, 3> steps() const { return {dx_deg, dy_deg, dz_deg}; }
  /// Throws InvalidArgument when a step is outside [0, 360), does not divide 360,
  /// or ts_deg <= 0.
  void validate() const;
};

enum class AxisKind { none, finite, infinite };

struct AxisClass {
  AxisKind kind = AxisKind::none;
  double step_deg = 0.0;
};

std::array<AxisClass, 3> classify_axes(const SymmetryDescriptor& desc);

/// Finite rotation group S, identity first.
struct SymmetryGroup {
  std::vector<Mat3> matrices;
  std::array<bool, 3> generator_axes{false, false, false};

  std::size_t size() const { return matrices.size(); }
  bool contains(const Mat3& m, double tol = kMatrixTol) const;

  static constexpr std::size_t kMaxSize = 360;
  static constexpr double kMatrixTol = 1e-6;
};

SymmetryGroup build_symmetry_group(const SymmetryDescriptor& desc);

/// Component-wise mask removing coordinates made irrelevant by infinite symmetry.
struct AxisMask {
  Vec3 v = Vec3::Ones();

  Vec3 apply(const Vec3& m) const { return m.cwiseProduct(v); }
};

AxisMask build_axis_mask(const SymmetryDescriptor& desc);

struct PoseDistance {
  std::vector<double> per_point;  // mm, one entry per model point
  double mean = 0.0;              // mm
  std::size_t symmetry_index = 0; // index into S of the minimizing element
};

/// Symmetry-aware distance between gt and pred placements of a model: per-point
/// distances under the element of S that minimizes the mean.
PoseDistance symmetric_pose_distance(const PointCloud& model, const Pose& gt, const Pose& pred,
                                     const SymmetryGroup& group, const AxisMask& mask);

/// Mean-only variant of symmetric_pose_distance for hot loops.
double symmetric_mean_distance(const PointCloud& model, const Mat3& r_gt, const Vec3& t_gt,
                               const Mat3& r_pred, const Vec3& t_pred, const SymmetryGroup& group,
                               const AxisMask& mask);

}  // namespace symbin
