#include "symbin/cluster.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "kdtree.hpp"

namespace symbin {

namespace {

using Index = std::size_t;

struct CellKey {
  std::array<long long, 3> c{0, 0, 0};
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::size_t h = 1469598103934665603ull;
    for (auto v : k.c) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
    return h;
  }
};

// Uniform grid over the leading (up to three) feature dimensions with cell side
// equal to the bandwidth. Distances in the full space dominate distances in the
// leading dimensions, so scanning the 3^g surrounding cells finds every
// neighbor within the bandwidth.
class NeighborGrid {
 public:
  NeighborGrid(const Eigen::MatrixXd& f, double cell)
      : f_(f), cell_(cell), dims_(static_cast<int>(std::min<Eigen::Index>(3, f.rows()))) {
    for (Eigen::Index i = 0; i < f.cols(); ++i) {
      cells_[key_of(f.col(i))].push_back(static_cast<Index>(i));
    }
  }

  template <typename Visit>
  void for_each_within(const Eigen::VectorXd& x, double radius2, Visit&& visit) const {
    const CellKey base = key_of(x);
    CellKey k = base;
    const int span = dims_ == 0 ? 1 : static_cast<int>(std::pow(3, dims_));
    for (int code = 0; code < span; ++code) {
      int rest = code;
      for (int d = 0; d < dims_; ++d) {
        k.c[d] = base.c[d] + (rest % 3) - 1;
        rest /= 3;
      }
      const auto it = cells_.find(k);
      if (it == cells_.end()) continue;
      for (Index i : it->second) {
        const double d2 = (f_.col(static_cast<Eigen::Index>(i)) - x).squaredNorm();
        if (d2 <= radius2) visit(i);
      }
    }
  }

 private:
  template <typename V>
  CellKey key_of(const V& x) const {
    CellKey k;
    for (int d = 0; d < dims_; ++d) k.c[d] = static_cast<long long>(std::floor(x[d] / cell_));
    return k;
  }

  const Eigen::MatrixXd& f_;
  double cell_;
  int dims_;
  std::unordered_map<CellKey, std::vector<Index>, CellHash> cells_;
};

std::vector<Index> bin_seeds(const Eigen::MatrixXd& f, double cell) {
  std::map<std::vector<long long>, std::vector<Index>> bins;
  std::vector<long long> key(static_cast<std::size_t>(f.rows()));
  for (Eigen::Index i = 0; i < f.cols(); ++i) {
    for (Eigen::Index d = 0; d < f.rows(); ++d) {
      key[static_cast<std::size_t>(d)] = static_cast<long long>(std::floor(f(d, i) / cell));
    }
    bins[key].push_back(static_cast<Index>(i));
  }
  std::vector<Index> seeds;
  seeds.reserve(bins.size());
  for (const auto& [k, members] : bins) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(f.rows());
    for (Index i : members) mean += f.col(static_cast<Eigen::Index>(i));
    mean /= static_cast<double>(members.size());
    Index best = members.front();
    double best_d2 = (f.col(static_cast<Eigen::Index>(best)) - mean).squaredNorm();
    for (Index i : members) {
      const double d2 = (f.col(static_cast<Eigen::Index>(i)) - mean).squaredNorm();
      if (d2 < best_d2) {
        best = i;
        best_d2 = d2;
      }
    }
    seeds.push_back(best);
  }
  std::sort(seeds.begin(), seeds.end());
  return seeds;
}

bool lexicographic_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    if (a[d] != b[d]) return a[d] < b[d];
  }
  return false;
}

}  // namespace

MeanShiftResult mean_shift(const Eigen::MatrixXd& features, const MeanShiftParams& params,
                           std::span<const double> weights) {
  if (!(params.bandwidth > 0.0)) throw InvalidArgument("mean shift bandwidth must be positive");
  const Index n = static_cast<Index>(features.cols());
  MeanShiftResult result;
  result.labels.assign(n, -1);
  if (n == 0) return result;
  if (!weights.empty() && weights.size() != n) {
    throw InvalidArgument("mean shift weights must match the feature count");
  }
  const auto weight = [&](Index i) { return weights.empty() ? 1.0 : weights[i]; };

  const double bw = params.bandwidth;
  const double bw2 = bw * bw;
  const NeighborGrid grid(features, bw);

  struct Mode {
    Eigen::VectorXd x;
    double density = 0.0;
    Index seed = 0;
  };
  std::vector<Mode> modes;
  for (Index seed : bin_seeds(features, bw / 2.0)) {
    Eigen::VectorXd x = features.col(static_cast<Eigen::Index>(seed));
    for (int it = 0; it < params.max_iters; ++it) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(features.rows());
      double total = 0.0;
      grid.for_each_within(x, bw2, [&](Index i) {
        sum += weight(i) * features.col(static_cast<Eigen::Index>(i));
        total += weight(i);
      });
      if (total <= 0.0) break;
      const Eigen::VectorXd next = sum / total;
      const double shift = (next - x).norm();
      x = next;
      if (shift < params.tol) break;
    }
    double density = 0.0;
    grid.for_each_within(x, bw2, [&](Index i) { density += weight(i); });
    modes.push_back({std::move(x), density, seed});
  }

  std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    if (a.density != b.density) return a.density > b.density;
    if (lexicographic_less(a.x, b.x)) return true;
    if (lexicographic_less(b.x, a.x)) return false;
    return a.seed < b.seed;
  });
  std::vector<Eigen::VectorXd> kept;
  const double merge2 = 0.25 * bw2;
  for (const auto& m : modes) {
    const bool near_kept = std::any_of(kept.begin(), kept.end(), [&](const Eigen::VectorXd& k) {
      return (k - m.x).squaredNorm() <= merge2;
    });
    if (!near_kept) kept.push_back(m.x);
  }

  std::vector<std::vector<Index>> members(kept.size());
  std::vector<double> mass(kept.size(), 0.0);
  for (Index i = 0; i < n; ++i) {
    const auto fi = features.col(static_cast<Eigen::Index>(i));
    int best = -1;
    double best_d2 = bw2;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const double d2 = (fi - kept[k]).squaredNorm();
      if (d2 < best_d2 || (best < 0 && d2 <= best_d2)) {
        best = static_cast<int>(k);
        best_d2 = d2;
      }
    }
    if (best >= 0) {
      members[static_cast<std::size_t>(best)].push_back(i);
      mass[static_cast<std::size_t>(best)] += weight(i);
    }
  }

  for (std::size_t k = 0; k < kept.size(); ++k) {
    if (members[k].empty() || mass[k] < params.min_points) continue;
    const int label = static_cast<int>(result.clusters.size());
    for (Index i : members[k]) result.labels[i] = label;
    result.clusters.push_back({kept[k], std::move(members[k]), mass[k]});
  }
  return result;
}

void PerPointPrediction::validate() const {
  if (centroids.size() != positions.size() || quats.size() != positions.size()) {
    throw InvalidArgument("prediction arrays are not congruent");
  }
}

void ClusterParams::validate() const {
  if (!(bandwidth_1 > 0.0) || !(bandwidth_2 > 0.0)) {
    throw InvalidArgument("cluster bandwidths must be positive");
  }
  if (!(bandwidth_2 < bandwidth_1)) {
    throw InvalidArgument("stage-2 bandwidth must be smaller than stage-1 bandwidth");
  }
  if (min_points_1 < 0.0 || min_points_2 < min_points_1) {
    throw InvalidArgument("stage-2 min points must be at least the stage-1 min points");
  }
  if (!(quat_scale > 0.0)) throw InvalidArgument("quaternion scale must be positive");
  if (max_iters <= 0 || !(convergence_tol > 0.0)) {
    throw InvalidArgument("mean shift needs positive max_iters and convergence_tol");
  }
}

Eigen::MatrixXd stage1_features(const PerPointPrediction& pred, double quat_scale) {
  pred.validate();
  Eigen::MatrixXd f(7, static_cast<Eigen::Index>(pred.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    f.block<3, 1>(0, c) = pred.centroids[i];
    f.block<4, 1>(3, c) = quat_scale * canonicalize_sign(pred.quats[i].coeffs());
  }
  return f;
}

Quaternion average_quaternion(std::span<const Quaternion> quats) {
  if (quats.empty()) return Quaternion::identity();
  const Vec4 ref = quats.front().coeffs();
  Vec4 sum = Vec4::Zero();
  for (const auto& q : quats) {
    const Vec4 c = q.coeffs();
    sum += c.dot(ref) < 0.0 ? Vec4(-c) : c;
  }
  return Quaternion::normalized(sum);
}

namespace {

constexpr std::size_t kVoteModelPoints = 64;

Stage1Cluster make_stage1(const PerPointPrediction& pred, std::vector<std::size_t> members) {
  Stage1Cluster c;
  std::vector<Quaternion> quats;
  quats.reserve(members.size());
  for (auto i : members) {
    c.mean_centroid += pred.centroids[i];
    quats.push_back(pred.quats[i]);
  }
  c.mean_centroid /= static_cast<double>(members.size());
  c.representative = average_quaternion(quats);
  c.members = std::move(members);
  return c;
}

}  // namespace

Pose pose_vote(std::span<const std::size_t> stage1_ids, std::span<const Stage1Cluster> stage1,
               const PerPointPrediction& pred, const ObjectModel& model) {
  if (stage1_ids.empty()) throw InvalidArgument("pose vote needs at least one stage-1 cluster");
  Vec3 t = Vec3::Zero();
  double count = 0.0;
  std::vector<Mat3> member_rots;
  for (auto id : stage1_ids) {
    const auto& c = stage1[id];
    const double m = static_cast<double>(c.members.size());
    t += m * c.mean_centroid;
    count += m;
    for (auto i : c.members) member_rots.push_back(quat_to_matrix(pred.quats[i]));
  }
  t /= count;

  const PointCloud sample = subsample(model.cloud, kVoteModelPoints);
  const Vec3 zero = Vec3::Zero();
  std::size_t best = stage1_ids.front();
  double best_cost = std::numeric_limits<double>::infinity();
  for (auto id : stage1_ids) {
    const Mat3 r = quat_to_matrix(stage1[id].representative);
    double cost = 0.0;
    for (const auto& rj : member_rots) {
      cost += symmetric_mean_distance(sample, r, zero, rj, zero, model.group, model.mask);
      if (cost >= best_cost) break;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = id;
    }
  }
  return {stage1[best].representative, t};
}

ClusterResult two_stage_pipeline(const PerPointPrediction& pred, const ClusterParams& params,
                                 const ObjectModel& model) {
  pred.validate();
  params.validate();
  ClusterResult out;
  out.labels.assign(pred.size(), -1);

  const auto ms1 = mean_shift(stage1_features(pred, params.quat_scale),
                              {params.bandwidth_1, params.min_points_1, params.max_iters,
                               params.convergence_tol});
  for (const auto& c : ms1.clusters) out.stage1.push_back(make_stage1(pred, c.members));
  if (out.stage1.empty()) {
    out.no_clusters = true;
    return out;
  }

  Eigen::MatrixXd centers(3, static_cast<Eigen::Index>(out.stage1.size()));
  std::vector<double> counts;
  for (std::size_t k = 0; k < out.stage1.size(); ++k) {
    centers.col(static_cast<Eigen::Index>(k)) = out.stage1[k].mean_centroid;
    counts.push_back(static_cast<double>(out.stage1[k].members.size()));
  }
  const auto ms2 = mean_shift(centers,
                              {params.bandwidth_2, params.min_points_2, params.max_iters,
                               params.convergence_tol},
                              counts);
  for (const auto& c : ms2.clusters) {
    InstanceEstimate inst;
    inst.stage1_ids = c.members;
    for (auto id : c.members) {
      const auto& m = out.stage1[id].members;
      inst.members.insert(inst.members.end(), m.begin(), m.end());
    }
    std::sort(inst.members.begin(), inst.members.end());
    inst.pose = pose_vote(inst.stage1_ids, out.stage1, pred, model);
    const int label = static_cast<int>(out.instances.size());
    for (auto i : inst.members) out.labels[i] = label;
    out.instances.push_back(std::move(inst));
  }
  out.no_clusters = out.instances.empty();
  return out;
}

ClusterResult single_stage_pipeline(const PerPointPrediction& pred, const ClusterParams& params) {
  pred.validate();
  params.validate();
  ClusterResult out;
  out.labels.assign(pred.size(), -1);

  Eigen::MatrixXd f(3, static_cast<Eigen::Index>(pred.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) f.col(static_cast<Eigen::Index>(i)) = pred.centroids[i];
  const auto ms = mean_shift(
      f, {params.bandwidth_1, params.min_points_1, params.max_iters, params.convergence_tol});
  for (const auto& c : ms.clusters) {
    const std::size_t id = out.stage1.size();
    out.stage1.push_back(make_stage1(pred, c.members));
    InstanceEstimate inst;
    inst.stage1_ids = {id};
    inst.members = c.members;
    inst.pose = {out.stage1[id].representative, out.stage1[id].mean_centroid};
    const int label = static_cast<int>(out.instances.size());
    for (auto i : inst.members) out.labels[i] = label;
    out.instances.push_back(std::move(inst));
  }
  out.no_clusters = out.instances.empty();
  return out;
}

IcpResult icp_refine(const PointCloud& scene_points, const PointCloud& model, const Pose& init,
                     const IcpParams& params) {
  if (scene_points.empty() || model.empty()) {
    throw InvalidArgument("ICP needs non-empty scene and model clouds");
  }
  const detail::KdTree3 tree(model);
  IcpResult result;
  result.pose = init;
  Mat3 r = init.matrix();
  Vec3 t = init.translation;
  const double inv_n = 1.0 / static_cast<double>(scene_points.size());
  std::vector<std::size_t> match(scene_points.size());

  for (;;) {
    double sse = 0.0;
    const Mat3 rt = r.transpose();
    for (std::size_t i = 0; i < scene_points.size(); ++i) {
      const auto [idx, d2] = tree.nearest(rt * (scene_points[i] - t));
      match[i] = idx;
      sse += d2;
    }
    const double mse = sse * inv_n;
    const bool stalled = !result.errors.empty() && result.errors.back() - mse < params.tol;
    result.errors.push_back(mse);
    if (stalled || result.iterations >= params.max_iters) break;

    Vec3 m_mean = Vec3::Zero();
    Vec3 p_mean = Vec3::Zero();
    for (std::size_t i = 0; i < scene_points.size(); ++i) {
      m_mean += model[match[i]];
      p_mean += scene_points[i];
    }
    m_mean *= inv_n;
    p_mean *= inv_n;
    Mat3 h = Mat3::Zero();
    for (std::size_t i = 0; i < scene_points.size(); ++i) {
      h += (model[match[i]] - m_mean) * (scene_points[i] - p_mean).transpose();
    }
    const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (!(sv[0] > 0.0) || sv[1] < 1e-9 * sv[0]) {
      result.failed = true;
      result.pose = init;
      return result;
    }
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    r = svd.matrixV() * d * svd.matrixU().transpose();
    t = p_mean - r * m_mean;
    result.pose = Pose::from_matrix(r, t);
    r = result.pose.matrix();
    ++result.iterations;
  }
  return result;
}

}  // namespace symbin
