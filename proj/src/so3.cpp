#include "symbin/so3.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <string>

namespace symbin {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

const char* axis_name(int a) {
  static const char* names[] = {"x", "y", "z"};
  return names[a];
}

}  // namespace

Vec4 canonicalize_sign(const Vec4& q) {
  for (int i = 0; i < 4; ++i) {
    if (q[i] > 0.0) return q;
    if (q[i] < 0.0) return -q;
  }
  return q;
}

Quaternion Quaternion::normalized(double w, double x, double y, double z) {
  const Vec4 raw(w, x, y, z);
  const double n = raw.norm();
  if (!(n > 1e-12) || !std::isfinite(n)) {
    throw InvalidArgument("cannot normalize a zero or non-finite quaternion");
  }
  const Vec4 c = canonicalize_sign(raw / n);
  return {c[0], c[1], c[2], c[3]};
}

Quaternion Quaternion::from_unit(const Vec4& wxyz) {
  if (std::abs(wxyz.norm() - 1.0) > 1e-6) {
    throw InvalidArgument("quaternion is not unit-norm (|q| = " + std::to_string(wxyz.norm()) + ")");
  }
  // Already unit to round-off: keep the bits so files round-trip exactly.
  if (std::abs(wxyz.norm() - 1.0) <= 1e-12) {
    const Vec4 c = canonicalize_sign(wxyz);
    return {c[0], c[1], c[2], c[3]};
  }
  return normalized(wxyz);
}

Mat3 quat_to_matrix(const Quaternion& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Mat3 quat_to_matrix(const Vec4& wxyz) { return quat_to_matrix(Quaternion::from_unit(wxyz)); }

bool is_rotation(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

Quaternion matrix_to_quat(const Mat3& r) {
  if (!is_rotation(r, 1e-6)) throw InvalidArgument("matrix is not a proper rotation");
  const double trace = r.trace();
  double w, x, y, z;
  if (trace >= r(0, 0) && trace >= r(1, 1) && trace >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(std::max(0.0, 1.0 + trace));
    w = 0.25 * s;
    x = (r(2, 1) - r(1, 2)) / s;
    y = (r(0, 2) - r(2, 0)) / s;
    z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(std::max(0.0, 1.0 + r(0, 0) - r(1, 1) - r(2, 2)));
    w = (r(2, 1) - r(1, 2)) / s;
    x = 0.25 * s;
    y = (r(0, 1) + r(1, 0)) / s;
    z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(std::max(0.0, 1.0 + r(1, 1) - r(0, 0) - r(2, 2)));
    w = (r(0, 2) - r(2, 0)) / s;
    x = (r(0, 1) + r(1, 0)) / s;
    y = 0.25 * s;
    z = (r(1, 2) + r(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(std::max(0.0, 1.0 + r(2, 2) - r(0, 0) - r(1, 1)));
    w = (r(1, 0) - r(0, 1)) / s;
    x = (r(0, 2) + r(2, 0)) / s;
    y = (r(1, 2) + r(2, 1)) / s;
    z = 0.25 * s;
  }
  return Quaternion::normalized(w, x, y, z);
}

Mat3 axis_angle_matrix(const Vec3& axis, double degrees) {
  return Eigen::AngleAxisd(degrees * kDegToRad, axis.normalized()).toRotationMatrix();
}

double rotation_angle_deg(const Mat3& rotation) {
  const double c = std::clamp((rotation.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) / kDegToRad;
}

void SymmetryDescriptor::validate() const {
  const auto s = steps();
  for (int a = 0; a < 3; ++a) {
    const double d = s[a];
    if (!std::isfinite(d) || d < 0.0 || d >= 360.0) {
      throw InvalidArgument(std::string("symmetry step d_") + axis_name(a) + " must lie in [0, 360)");
    }
    if (d > 0.0) {
      const double k = 360.0 / d;
      if (std::abs(k - std::round(k)) > 1e-6) {
        throw InvalidArgument(std::string("symmetry step d_") + axis_name(a) + " = " +
                              std::to_string(d) + " does not divide 360");
      }
    }
  }
  if (!(ts_deg > 0.0) || !std::isfinite(ts_deg)) {
    throw InvalidArgument("infinite-symmetry threshold t_s must be positive");
  }
}

std::array<AxisClass, 3> classify_axes(const SymmetryDescriptor& desc) {
  desc.validate();
  std::array<AxisClass, 3> out{};
  const auto s = desc.steps();
  for (int a = 0; a < 3; ++a) {
    if (s[a] == 0.0) {
      out[a] = {AxisKind::none, 0.0};
    } else if (s[a] < desc.ts_deg) {
      out[a] = {AxisKind::infinite, s[a]};
    } else {
      out[a] = {AxisKind::finite, s[a]};
    }
  }
  return out;
}

bool SymmetryGroup::contains(const Mat3& m, double tol) const {
  return std::any_of(matrices.begin(), matrices.end(),
                     [&](const Mat3& e) { return (e - m).norm() <= tol; });
}

SymmetryGroup build_symmetry_group(const SymmetryDescriptor& desc) {
  const auto classes = classify_axes(desc);
  SymmetryGroup group;
  group.matrices.push_back(Mat3::Identity());

  std::vector<Mat3> generators;
  for (int a = 0; a < 3; ++a) {
    if (classes[a].kind != AxisKind::finite) continue;
    group.generator_axes[a] = true;
    generators.push_back(axis_angle_matrix(Vec3::Unit(a), classes[a].step_deg));
  }

  // Right-multiplying by generators until nothing new appears yields the group
  // closure, since every generator has finite order.
  for (std::size_t i = 0; i < group.matrices.size(); ++i) {
    for (const auto& g : generators) {
      const Mat3 c = group.matrices[i] * g;
      if (group.contains(c)) continue;
      if (group.matrices.size() == SymmetryGroup::kMaxSize) {
        throw UnsupportedSymmetry("symmetry generators do not close within " +
                                  std::to_string(SymmetryGroup::kMaxSize) + " elements");
      }
      group.matrices.push_back(c);
    }
  }
  return group;
}

AxisMask build_axis_mask(const SymmetryDescriptor& desc) {
  const auto classes = classify_axes(desc);
  int infinite = 0;
  int axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (classes[a].kind == AxisKind::infinite) {
      ++infinite;
      axis = a;
    }
  }
  switch (infinite) {
    case 0:
      return {Vec3::Ones()};
    case 1:
      return {Vec3::Unit(axis)};
    case 3:
      return {Vec3::Zero()};
    default:
      throw InvalidArgument("exactly two infinitely symmetric axes is geometrically inconsistent");
  }
}

double symmetric_mean_distance(const PointCloud& model, const Mat3& r_gt, const Vec3& t_gt,
                               const Mat3& r_pred, const Vec3& t_pred, const SymmetryGroup& group,
                               const AxisMask& mask) {
  if (model.empty()) throw InvalidArgument("symmetric pose distance needs a non-empty model");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : group.matrices) {
    const Mat3 a = r_gt * s;
    double sum = 0.0;
    for (const auto& m : model) {
      const Vec3 mv = mask.apply(m);
      sum += ((a * mv + t_gt) - (r_pred * mv + t_pred)).norm();
    }
    best = std::min(best, sum / static_cast<double>(model.size()));
  }
  return best;
}

PoseDistance symmetric_pose_distance(const PointCloud& model, const Pose& gt, const Pose& pred,
                                     const SymmetryGroup& group, const AxisMask& mask) {
  if (model.empty()) throw InvalidArgument("symmetric pose distance needs a non-empty model");
  const Mat3 r_gt = gt.matrix();
  const Mat3 r_pred = pred.matrix();

  PoseDistance best;
  best.mean = std::numeric_limits<double>::infinity();
  std::vector<double> dist(model.size());
  for (std::size_t k = 0; k < group.size(); ++k) {
    const Mat3 a = r_gt * group.matrices[k];
    double sum = 0.0;
    for (std::size_t j = 0; j < model.size(); ++j) {
      const Vec3 mv = mask.apply(model[j]);
      dist[j] = ((a * mv + gt.translation) - (r_pred * mv + pred.translation)).norm();
      sum += dist[j];
    }
    const double mean = sum / static_cast<double>(model.size());
    if (mean < best.mean) {
      best.mean = mean;
      best.symmetry_index = k;
      best.per_point = dist;
    }
  }
  return best;
}

}  // namespace symbin
