#include "symbin/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace symbin {

namespace {

constexpr double kTieTol = 1e-6;

struct InstancePoints {
  std::size_t instance;
  std::vector<std::size_t> points;
};

// Instances that own at least one point, in instance order; points in input order.
std::vector<InstancePoints> group_points(const InstanceTargets& targets) {
  std::vector<std::vector<std::size_t>> by_instance(targets.instances.size());
  for (std::size_t j = 0; j < targets.points.size(); ++j) {
    by_instance[targets.points[j].instance].push_back(j);
  }
  std::vector<InstancePoints> out;
  for (std::size_t i = 0; i < by_instance.size(); ++i) {
    if (!by_instance[i].empty()) out.push_back({i, std::move(by_instance[i])});
  }
  if (out.empty()) throw InvalidArgument("loss needs at least one instance with points");
  return out;
}

PointCloud masked_model(const InstanceTarget& inst) {
  PointCloud out;
  out.reserve(inst.model->size());
  for (const auto& m : *inst.model) out.push_back(inst.mask.apply(m));
  return out;
}

Mat3 pred_rotation(const Vec4& raw) { return quat_to_matrix(Quaternion::normalized(raw)); }

// Mean over points j of mean_m |R_gt s b_m - R_j b_m| for each s in S.
std::vector<double> rotation_costs(const InstanceTarget& inst, const PointCloud& masked,
                                   const std::vector<Mat3>& pred_rots) {
  std::vector<double> costs;
  costs.reserve(inst.group.size());
  const double inv = 1.0 / static_cast<double>(masked.size() * pred_rots.size());
  for (const auto& s : inst.group.matrices) {
    const Mat3 target = inst.rotation * s;
    double sum = 0.0;
    for (const auto& r : pred_rots) {
      const Mat3 diff = target - r;
      for (const auto& b : masked) sum += (diff * b).norm();
    }
    costs.push_back(sum * inv);
  }
  return costs;
}

std::vector<double> instance_weights(const InstanceTargets& targets, const InstancePoints& ip) {
  PointCloud pts;
  pts.reserve(ip.points.size());
  for (auto j : ip.points) pts.push_back(targets.points[j].position);
  return center_weights(pts, targets.instances[ip.instance].centroid);
}

// dR/dq_k for q = (w, x, y, z), unit or not.
std::array<Mat3, 4> rotation_jacobian(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Mat3, 4> d;
  d[0] << 0, -z, y, z, 0, -x, -y, x, 0;
  d[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  d[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  d[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
  for (auto& m : d) m *= 2.0;
  return d;
}

void add_rotation_gradient(const InstanceTargets& targets, double scale, LossGradient& grad) {
  const auto groups = group_points(targets);
  const double inv_n = 1.0 / static_cast<double>(groups.size());
  for (const auto& ip : groups) {
    const auto& inst = targets.instances[ip.instance];
    const PointCloud masked = masked_model(inst);
    std::vector<Mat3> rots;
    for (auto j : ip.points) rots.push_back(pred_rotation(targets.points[j].pred_quat));
    const auto costs = rotation_costs(inst, masked, rots);

    std::vector<double> sorted = costs;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.size() > 1 && sorted[1] - sorted[0] < kTieTol) {
      throw SymmetryTie("rotation loss evaluated at a tie of the min over S");
    }
    const auto best = static_cast<std::size_t>(
        std::min_element(costs.begin(), costs.end()) - costs.begin());
    const Mat3 target = inst.rotation * inst.group.matrices[best];
    const double w = scale * inv_n / static_cast<double>(masked.size() * ip.points.size());

    for (std::size_t k = 0; k < ip.points.size(); ++k) {
      const std::size_t j = ip.points[k];
      Mat3 d_rot = Mat3::Zero();  // dL/dR_j
      for (const auto& b : masked) {
        const Vec3 r = (target - rots[k]) * b;
        const double nr = r.norm();
        if (nr > 0.0) d_rot -= (r / nr) * b.transpose();
      }
      d_rot *= w;

      const Vec4& raw = targets.points[j].pred_quat;
      const double norm = raw.norm();
      const Vec4 unit = raw / norm;
      const auto jac = rotation_jacobian(unit);
      Vec4 d_unit;
      for (int c = 0; c < 4; ++c) d_unit[c] = d_rot.cwiseProduct(jac[c]).sum();
      grad.quat[j] += (d_unit - unit * unit.dot(d_unit)) / norm;
    }
  }
}

void add_translation_gradient(const InstanceTargets& targets, double scale, LossGradient& grad) {
  const auto groups = group_points(targets);
  const double inv_n = 1.0 / static_cast<double>(groups.size());
  for (const auto& ip : groups) {
    const auto weights = instance_weights(targets, ip);
    const Vec3& gt = targets.instances[ip.instance].centroid;
    const double w = scale * inv_n / static_cast<double>(ip.points.size());
    for (std::size_t k = 0; k < ip.points.size(); ++k) {
      const std::size_t j = ip.points[k];
      const Vec3 e = gt - targets.points[j].pred_centroid;
      const double ne = e.norm();
      if (ne > 0.0) grad.centroid[j] -= w * weights[k] * e / ne;
    }
  }
}

}  // namespace

void LossWeights::validate() const {
  if (w_r < 0.0 || w_t < 0.0 || !std::isfinite(w_r) || !std::isfinite(w_t)) {
    throw InvalidArgument("loss weights must be finite and non-negative");
  }
  if (w_r == 0.0 && w_t == 0.0) throw InvalidArgument("loss weights must not both be zero");
}

void InstanceTargets::validate() const {
  if (instances.empty()) throw InvalidArgument("empty instance set");
  for (const auto& inst : instances) {
    if (!inst.model || inst.model->empty()) throw InvalidArgument("instance without a model");
    if (inst.group.matrices.empty()) throw InvalidArgument("instance with an empty symmetry group");
  }
  for (const auto& p : points) {
    if (p.instance >= instances.size()) throw InvalidArgument("point references unknown instance");
    if (!(p.pred_quat.norm() > 1e-12)) throw InvalidArgument("zero predicted quaternion");
  }
}

std::vector<double> center_weights(const PointCloud& instance_points, const Vec3& centroid) {
  std::vector<double> d;
  d.reserve(instance_points.size());
  for (const auto& p : instance_points) d.push_back((p - centroid).norm());
  if (d.empty()) return d;
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  const double d_min = *lo;
  const double range = *hi - d_min;
  for (auto& v : d) v = range < 1e-9 ? 1.0 : 0.5 + (v - d_min) / range;
  return d;
}

double rotation_loss(const InstanceTargets& targets) {
  targets.validate();
  const auto groups = group_points(targets);
  double total = 0.0;
  for (const auto& ip : groups) {
    const auto& inst = targets.instances[ip.instance];
    std::vector<Mat3> rots;
    rots.reserve(ip.points.size());
    for (auto j : ip.points) rots.push_back(pred_rotation(targets.points[j].pred_quat));
    const auto costs = rotation_costs(inst, masked_model(inst), rots);
    total += *std::min_element(costs.begin(), costs.end());
  }
  return total / static_cast<double>(groups.size());
}

double translation_loss(const InstanceTargets& targets) {
  targets.validate();
  const auto groups = group_points(targets);
  double total = 0.0;
  for (const auto& ip : groups) {
    const auto weights = instance_weights(targets, ip);
    const Vec3& gt = targets.instances[ip.instance].centroid;
    double sum = 0.0;
    for (std::size_t k = 0; k < ip.points.size(); ++k) {
      sum += (gt - targets.points[ip.points[k]].pred_centroid).norm() * weights[k];
    }
    total += sum / static_cast<double>(ip.points.size());
  }
  return total / static_cast<double>(groups.size());
}

double total_loss(const InstanceTargets& targets, const LossWeights& weights) {
  weights.validate();
  double out = 0.0;
  if (weights.w_r != 0.0) out += weights.w_r * rotation_loss(targets);
  if (weights.w_t != 0.0) out += weights.w_t * translation_loss(targets);
  return out;
}

double evaluate_loss(LossKind kind, const InstanceTargets& targets, const LossWeights& weights) {
  switch (kind) {
    case LossKind::rotation:
      return rotation_loss(targets);
    case LossKind::translation:
      return translation_loss(targets);
    case LossKind::total:
      return total_loss(targets, weights);
  }
  return 0.0;
}

double LossGradient::max_abs() const {
  double m = 0.0;
  for (const auto& c : centroid) m = std::max(m, c.cwiseAbs().maxCoeff());
  for (const auto& q : quat) m = std::max(m, q.cwiseAbs().maxCoeff());
  return m;
}

LossGradient loss_gradient(LossKind kind, const InstanceTargets& targets,
                           const LossWeights& weights) {
  targets.validate();
  LossGradient grad;
  grad.centroid.assign(targets.points.size(), Vec3::Zero());
  grad.quat.assign(targets.points.size(), Vec4::Zero());
  switch (kind) {
    case LossKind::rotation:
      add_rotation_gradient(targets, 1.0, grad);
      break;
    case LossKind::translation:
      add_translation_gradient(targets, 1.0, grad);
      break;
    case LossKind::total:
      weights.validate();
      if (weights.w_r != 0.0) add_rotation_gradient(targets, weights.w_r, grad);
      if (weights.w_t != 0.0) add_translation_gradient(targets, weights.w_t, grad);
      break;
  }
  return grad;
}

LossGradient numeric_gradient(LossKind kind, const InstanceTargets& targets, double epsilon,
                              const LossWeights& weights) {
  if (!(epsilon > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  InstanceTargets work = targets;
  LossGradient grad;
  grad.centroid.assign(targets.points.size(), Vec3::Zero());
  grad.quat.assign(targets.points.size(), Vec4::Zero());
  const auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + epsilon;
    const double up = evaluate_loss(kind, work, weights);
    slot = saved - epsilon;
    const double down = evaluate_loss(kind, work, weights);
    slot = saved;
    return (up - down) / (2.0 * epsilon);
  };
  for (std::size_t j = 0; j < work.points.size(); ++j) {
    for (int c = 0; c < 3; ++c) grad.centroid[j][c] = central(work.points[j].pred_centroid[c]);
    for (int c = 0; c < 4; ++c) grad.quat[j][c] = central(work.points[j].pred_quat[c]);
  }
  return grad;
}

GradcheckResult gradcheck(LossKind kind, const InstanceTargets& targets, double epsilon,
                          const LossWeights& weights) {
  const LossGradient analytic = loss_gradient(kind, targets, weights);
  const LossGradient numeric = numeric_gradient(kind, targets, epsilon, weights);
  double worst = 0.0;
  const auto compare = [&](double a, double n) {
    const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
    worst = std::max(worst, std::abs(a - n) / denom);
  };
  for (std::size_t j = 0; j < targets.points.size(); ++j) {
    for (int c = 0; c < 3; ++c) compare(analytic.centroid[j][c], numeric.centroid[j][c]);
    for (int c = 0; c < 4; ++c) compare(analytic.quat[j][c], numeric.quat[j][c]);
  }
  return {evaluate_loss(kind, targets, weights), worst};
}

InstanceTargets random_targets(std::mt19937_64& rng, const RandomTargetSpec& spec) {
  static const SymmetryDescriptor kDescriptors[] = {
      {0, 0, 0, 15}, {0, 0, 180, 15}, {0, 0, 90, 15}, {180, 0, 180, 15}, {0, 0, 5, 15},
  };
  std::uniform_int_distribution<std::size_t> n_inst(1, spec.max_instances);
  std::uniform_int_distribution<std::size_t> n_pts(1, spec.max_points_per_instance);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kDescriptors) - 1);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto random_axis = [&] {
    Vec3 a;
    do {
      a = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (a.norm() < 1e-6);
    return a.normalized();
  };

  InstanceTargets out;
  const std::size_t n = n_inst(rng);
  for (std::size_t i = 0; i < n; ++i) {
    InstanceTarget inst;
    auto model = std::make_shared<PointCloud>();
    for (std::size_t m = 0; m < spec.model_points; ++m) {
      model->push_back(0.5 * spec.model_extent_mm * Vec3(unit(rng), unit(rng), unit(rng)));
    }
    inst.model = model;
    const auto& desc = kDescriptors[pick(rng)];
    inst.group = build_symmetry_group(desc);
    inst.mask = build_axis_mask(desc);
    inst.rotation = axis_angle_matrix(random_axis(), 180.0 * unit(rng));
    inst.centroid = 200.0 * Vec3(unit(rng), unit(rng), unit(rng));
    out.instances.push_back(std::move(inst));

    const auto& placed = out.instances.back();
    std::vector<Mat3> gt_sym;
    for (const auto& g : placed.group.matrices) gt_sym.push_back(placed.rotation * g);

    // Rotation error of one predicted point under every element of S, per model
    // point relative to its masked radius. Near zero the point norm has a kink.
    const auto min_relative_error = [&](const Mat3& pred_rot) {
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& m : *placed.model) {
        const Vec3 mv = placed.mask.apply(m);
        if (mv.norm() < 1e-9) continue;
        for (const auto& r : gt_sym) worst = std::min(worst, ((r - pred_rot) * mv).norm() / mv.norm());
      }
      return worst;
    };

    const std::size_t m_pts = n_pts(rng);
    std::vector<PointTarget> pts;
    while (true) {
      pts.clear();
      std::vector<double> cost(gt_sym.size(), 0.0);
      for (std::size_t k = 0; k < m_pts; ++k) {
        PointTarget p;
        p.instance = i;
        const Vec3& local = (*placed.model)[k % placed.model->size()];
        p.position = placed.rotation * local + placed.centroid;
        p.pred_centroid = placed.centroid + spec.centroid_noise_mm *
                                                Vec3(gauss(rng), gauss(rng), gauss(rng));
        Mat3 noisy;
        do {
          noisy = placed.rotation *
                  axis_angle_matrix(random_axis(), spec.rotation_noise_deg * unit(rng));
        } while (min_relative_error(noisy) < spec.min_relative_error);
        for (std::size_t s = 0; s < gt_sym.size(); ++s) {
          for (const auto& m : *placed.model) {
            cost[s] += ((gt_sym[s] - noisy) * placed.mask.apply(m)).norm();
          }
        }
        const double raw_scale = 0.5 + std::abs(unit(rng));
        p.pred_quat = raw_scale * matrix_to_quat(noisy).coeffs();
        if (unit(rng) < 0.0) p.pred_quat = -p.pred_quat;
        pts.push_back(p);
      }
      // Same per-instance min over S as the loss (up to a positive factor).
      std::sort(cost.begin(), cost.end());
      const double scale = static_cast<double>(m_pts * placed.model->size());
      if (cost.size() < 2 || (cost[1] - cost[0]) / scale >= spec.min_symmetry_gap_mm) break;
    }
    out.points.insert(out.points.end(), pts.begin(), pts.end());
  }
  return out;
}

}  // namespace symbin
