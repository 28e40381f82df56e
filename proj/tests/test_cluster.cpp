#include "doctest.h"
#include "support.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "symbin/cluster.hpp"
#include "symbin/pipeline.hpp"
#include "symbin/synth.hpp"

using namespace symbin;
using namespace testing;

namespace {

Eigen::MatrixXd row(const std::vector<double>& xs) {
  Eigen::MatrixXd f(1, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) f(0, static_cast<Eigen::Index>(i)) = xs[i];
  return f;
}

// Instances laid out on a coarse grid so their centroids are far apart.
std::vector<Pose> spread_poses(std::mt19937_64& rng, std::size_t n, double spacing) {
  std::vector<Pose> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 t(spacing * static_cast<double>(i % 3), spacing * static_cast<double>(i / 3),
                 uniform(rng, 20, 60));
    out.push_back(Pose::from_matrix(testing::random_rotation(rng), t));
  }
  return out;
}

std::set<std::vector<std::size_t>> partition(const std::vector<int>& labels) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) groups[labels[i]].push_back(i);
  }
  std::set<std::vector<std::size_t>> out;
  for (auto& [k, v] : groups) out.insert(v);
  return out;
}

double min_distance(const Pose& est, const std::vector<Pose>& gts, const ObjectModel& m) {
  double best = INFINITY;
  for (const auto& g : gts) {
    best = std::min(best, symmetric_pose_distance(m.cloud, g, est, m.group, m.mask).mean);
  }
  return best;
}

}  // namespace

TEST_CASE("mean shift on two separated blobs") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 0.5);
  Eigen::MatrixXd f(2, 200);
  for (int i = 0; i < 200; ++i) f.col(i) = Eigen::Vector2d(g(rng) + (i < 100 ? 0.0 : 10.0), g(rng));
  const auto r = mean_shift(f, {3.0, 1.0});
  REQUIRE(r.clusters.size() == 2);
  for (int i = 0; i < 200; ++i) CHECK(r.labels[static_cast<std::size_t>(i)] == r.labels[i < 100 ? 0 : 100]);
  CHECK(r.labels[0] != r.labels[100]);
}

TEST_CASE("mean shift on identical points") {
  Eigen::MatrixXd f(3, 10);
  for (int i = 0; i < 10; ++i) f.col(i) = Eigen::Vector3d(1.5, -2.0, 7.0);
  const auto r = mean_shift(f, {1.0, 1.0});
  REQUIRE(r.clusters.size() == 1);
  CHECK(r.clusters[0].mode == Eigen::Vector3d(1.5, -2.0, 7.0));
  CHECK(r.clusters[0].members.size() == 10);
}

TEST_CASE("mean shift 1-D example against the grid density") {
  const std::vector<double> xs{0.0, 0.1, 0.2, 5.0, 5.1};
  const auto r = mean_shift(row(xs), {0.5, 2.0, 300, 1e-3});
  REQUIRE(r.clusters.size() == 2);
  CHECK(r.clusters[0].members == std::vector<std::size_t>{0, 1, 2});
  CHECK(r.clusters[1].members == std::vector<std::size_t>{3, 4});

  std::vector<GridPoint<1>> pts;
  for (double x : xs) pts.push_back({x});
  const auto modes = grid_modes<1>(pts, 0.5, 1e-3, 1e-5);
  REQUIRE(modes.size() == 2);
  for (const auto& c : r.clusters) {
    const bool matched = std::any_of(modes.begin(), modes.end(), [&](const GridMode& m) {
      return std::abs(m.x[0] - c.mode[0]) < 1e-3;
    });
    CHECK(matched);
  }
}

TEST_CASE("mean shift edge cases") {
  CHECK(mean_shift(Eigen::MatrixXd(3, 0), {1.0, 1.0}).clusters.empty());
  CHECK_THROWS_AS(mean_shift(row({1.0}), {0.0, 1.0}), InvalidArgument);
  const std::vector<double> w{1.0};
  CHECK_THROWS_AS(mean_shift(row({1.0, 2.0}), {1.0, 1.0}, w), InvalidArgument);

  // Clusters lighter than min_points are dropped and their members unassigned.
  const auto r = mean_shift(row({0.0, 0.1, 0.2, 9.0}), {0.5, 2.0});
  REQUIRE(r.clusters.size() == 1);
  CHECK(r.labels[3] == -1);
}

TEST_CASE("mean shift weights move modes and gate min_points") {
  const std::vector<double> w{1.0, 1.0, 10.0};
  const auto r = mean_shift(row({0.0, 0.2, 0.4}), {1.0, 1.0}, w);
  REQUIRE(r.clusters.size() == 1);
  CHECK(r.clusters[0].mode[0] == doctest::Approx((0.0 + 0.2 + 4.0) / 12.0));
  CHECK(r.clusters[0].weight == 12.0);
  const std::vector<double> light{1.0, 1.0, 1.0};
  CHECK(mean_shift(row({0.0, 0.2, 0.4}), {1.0, 4.0}, light).clusters.empty());
}

TEST_CASE("mean shift is invariant to input order") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> xs;
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < 20; ++i) xs.push_back(10.0 * c + uniform(rng, -1, 1));
    }
    std::vector<std::size_t> perm(xs.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> shuffled;
    for (auto i : perm) shuffled.push_back(xs[i]);
    const auto a = mean_shift(row(xs), {2.0, 1.0});
    const auto b = mean_shift(row(shuffled), {2.0, 1.0});
    REQUIRE(a.clusters.size() == b.clusters.size());
    std::vector<int> relabel(xs.size());
    for (std::size_t k = 0; k < perm.size(); ++k) relabel[perm[k]] = b.labels[k];
    CHECK(partition(a.labels) == partition(relabel));
  }
}

TEST_CASE("stage-1 features") {
  PerPointPrediction p;
  const Quaternion q = matrix_to_quat(rodrigues(Vec3(1, 1, 0), 30));
  const Quaternion flip = matrix_to_quat(quat_to_matrix(q) * rodrigues(Vec3::UnitZ(), 180));
  p.positions = {Vec3::Zero(), Vec3::Zero()};
  p.centroids = {Vec3(1, 2, 3), Vec3(1, 2, 3)};
  p.quats = {q, flip};
  const auto f0 = stage1_features(p, 0.0);
  CHECK(f0.rows() == 7);
  CHECK(f0.bottomRows(4).isZero(0.0));
  CHECK(f0.col(0).head<3>() == Vec3(1, 2, 3));
  const auto f = stage1_features(p, 20.0);
  CHECK((f.col(0) - f.col(1)).norm() == doctest::Approx(20.0 * (q.coeffs() - flip.coeffs()).norm()));
  CHECK((f.col(0) - f.col(1)).norm() > 20.0);
}

TEST_CASE("cluster parameter validation") {
  ClusterParams p;
  CHECK_NOTHROW(p.validate());
  p.bandwidth_2 = 6.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.min_points_2 = 10;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.quat_scale = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("pose vote") {
  const ObjectModel m = two_fold_model();
  const Quaternion q = matrix_to_quat(rodrigues(Vec3(0.3, 1, 0.2), 50));
  const Quaternion flip = matrix_to_quat(quat_to_matrix(q) * m.group.matrices[1]);
  PerPointPrediction p;
  for (int i = 0; i < 6; ++i) {
    p.positions.push_back(Vec3::Zero());
    p.centroids.push_back(Vec3(i < 4 ? 0.0 : 3.0, 0, 0));
    p.quats.push_back(i % 2 ? flip : q);
  }
  std::vector<Stage1Cluster> s1(2);
  s1[0] = {{0, 1, 2, 3}, Vec3(0, 0, 0), q};
  s1[1] = {{4, 5}, Vec3(3, 0, 0), flip};
  const std::vector<std::size_t> ids{0, 1};
  const Pose v = pose_vote(ids, s1, p, m);
  CHECK(v.translation.isApprox(Vec3(1.0, 0, 0)));
  CHECK((v.rotation == q || v.rotation == flip));
  CHECK(symmetric_pose_distance(m.cloud, {q, Vec3::Zero()}, {v.rotation, Vec3::Zero()}, m.group, m.mask).mean < 1e-9);

  const std::vector<std::size_t> one{0};
  PerPointPrediction same = p;
  for (auto& x : same.quats) x = q;
  CHECK(pose_vote(one, s1, same, m).rotation == q);
}

TEST_CASE("single isolated instance, perfect and ambiguous oracle") {
  const ObjectModel m = two_fold_model();
  const Pose gt = Pose::from_matrix(rodrigues(Vec3(1, 2, 3), 40), Vec3(10, 20, 50));
  const Scene scene = scene_from_poses(m, {gt});
  for (bool ambiguous : {false, true}) {
    OracleParams op;
    op.symmetric_ambiguity = ambiguous;
    const auto pred = oracle_predict(scene, m, op);
    const auto est = estimate_poses(pred, m, {}, false);
    CHECK(est.stage1_clusters == (ambiguous ? m.group.size() : 1));
    REQUIRE(est.poses.size() == 1);
    CHECK(symmetric_pose_distance(m.cloud, gt, est.poses[0], m.group, m.mask).mean < 1e-9);
  }
}

TEST_CASE("two-fold ambiguity doubles stage 1 and stage 2 restores the count") {
  const ObjectModel m = two_fold_model();
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    const auto gts = spread_poses(rng, 2 + static_cast<std::size_t>(trial), 200.0);
    const Scene scene = scene_from_poses(m, gts);
    OracleParams op;
    op.symmetric_ambiguity = true;
    op.seed = static_cast<std::uint64_t>(trial);
    const auto pred = oracle_predict(scene, m, op);

    const auto two = estimate_poses(pred, m, {}, false);
    CHECK(two.stage1_clusters == 2 * gts.size());
    REQUIRE(two.poses.size() == gts.size());
    for (const auto& p : two.poses) CHECK(min_distance(p, gts, m) < 1e-9);

    // Averaging both equivalents gives blended rotations far from any gt.
    const auto single = estimate_poses(pred, m, {}, true);
    REQUIRE(single.poses.size() == gts.size());
    for (const auto& p : single.poses) CHECK(min_distance(p, gts, m) > 5.0 * 3);
  }
}

TEST_CASE("voted rotation under rotation noise") {
  const ObjectModel m = two_fold_model();
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gts = spread_poses(rng, 3, 200.0);
    const Scene scene = scene_from_poses(m, gts);
    OracleParams op;
    op.sigma_r_deg = 3.0;
    op.symmetric_ambiguity = true;
    op.seed = static_cast<std::uint64_t>(100 + trial);
    const auto est = estimate_poses(oracle_predict(scene, m, op), m, {}, false);
    REQUIRE(est.poses.size() == gts.size());
    for (const auto& p : est.poses) {
      double best = INFINITY;
      for (const auto& g : gts) {
        for (const auto& s : m.group.matrices) {
          best = std::min(best, rotation_angle_deg((g.matrix() * s).transpose() * p.matrix()));
        }
      }
      CHECK(best < 3.0);
    }
  }
}

TEST_CASE("perfect oracle recovers the instance count") {
  std::mt19937_64 rng(45);
  const ObjectModel models[] = {two_fold_model(), four_fold_model(), blob_model()};
  for (int trial = 0; trial < 100; ++trial) {
    const ObjectModel& m = models[trial % 3];
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 6);
    const auto gts = spread_poses(rng, n, 150.0);
    const Scene scene = scene_from_poses(m, gts);
    const auto est = estimate_poses(oracle_predict(scene, m, {}), m, {}, false);
    REQUIRE(est.poses.size() == n);
    // Labels reproduce the instance partition exactly.
    CHECK(partition(est.labels) == partition(scene.labels));
  }
}

TEST_CASE("pipeline output is invariant to point order") {
  const ObjectModel m = two_fold_model();
  std::mt19937_64 rng(46);
  for (int trial = 0; trial < 3; ++trial) {
    const auto gts = spread_poses(rng, 4, 150.0);
    OracleParams op;
    op.sigma_t = 1.0;
    op.sigma_r_deg = 2.0;
    op.symmetric_ambiguity = true;
    const auto pred = oracle_predict(scene_from_poses(m, gts), m, op);
    std::vector<std::size_t> perm(pred.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    PerPointPrediction shuffled;
    for (auto i : perm) {
      shuffled.positions.push_back(pred.positions[i]);
      shuffled.centroids.push_back(pred.centroids[i]);
      shuffled.quats.push_back(pred.quats[i]);
    }
    const auto a = estimate_poses(pred, m, {}, false);
    const auto b = estimate_poses(shuffled, m, {}, false);
    REQUIRE(a.poses.size() == b.poses.size());
    std::vector<int> relabel(pred.size());
    for (std::size_t k = 0; k < perm.size(); ++k) relabel[perm[k]] = b.labels[k];
    CHECK(partition(a.labels) == partition(relabel));
    for (const auto& p : a.poses) {
      const bool found = std::any_of(b.poses.begin(), b.poses.end(), [&](const Pose& q) {
        return (p.translation - q.translation).norm() < 1e-9 &&
               (p.rotation.coeffs() - q.rotation.coeffs()).norm() < 1e-9;
      });
      CHECK(found);
    }
  }
}

TEST_CASE("final instances are disjoint and large enough") {
  const ObjectModel m = two_fold_model();
  std::mt19937_64 rng(47);
  const auto gts = spread_poses(rng, 5, 150.0);
  OracleParams op;
  op.sigma_t = 1.0;
  op.symmetric_ambiguity = true;
  op.outlier_fraction = 0.05;
  const Scene scene = scene_from_poses(m, gts);
  const auto pred = oracle_predict(scene, m, op);
  const NormalizedScene ns = normalize_scene(pred.positions, fit_normalization(m.cloud));
  PerPointPrediction np = pred;
  np.positions = ns.points;
  for (auto& c : np.centroids) c = ns.transform.to_normalized(c);
  const ObjectModel scaled = ObjectModel::make(m.name, scale_cloud(m.cloud, ns.transform.scale), m.symmetry);
  const ClusterParams params;
  const auto r = two_stage_pipeline(np, params, scaled);
  CHECK(r.instances.size() <= r.stage1.size());
  std::vector<int> seen(pred.size(), -1);
  for (std::size_t k = 0; k < r.instances.size(); ++k) {
    CHECK(static_cast<double>(r.instances[k].members.size()) >= params.min_points_1);
    for (auto i : r.instances[k].members) {
      CHECK(seen[i] == -1);
      seen[i] = static_cast<int>(k);
      CHECK(r.labels[i] == static_cast<int>(k));
    }
  }
}

TEST_CASE("clustering is scale invariant with proportional parameters") {
  const ObjectModel m = two_fold_model();
  std::mt19937_64 rng(48);
  for (int trial = 0; trial < 10; ++trial) {
    const auto gts = spread_poses(rng, 3, 150.0);
    OracleParams op;
    op.sigma_t = 1.0;
    op.sigma_r_deg = 2.0;
    op.symmetric_ambiguity = true;
    op.seed = static_cast<std::uint64_t>(trial);
    const auto pred = oracle_predict(scene_from_poses(m, gts), m, op);
    const double scale = fit_normalization(m.cloud).scale;

    // Same pipeline run directly in millimeters: every length divided by scale.
    const Vec3 offset = centroid(pred.positions);
    PerPointPrediction raw = pred;
    for (auto& p : raw.positions) p -= offset;
    for (auto& c : raw.centroids) c -= offset;
    ClusterParams mm;
    mm.bandwidth_1 /= scale;
    mm.bandwidth_2 /= scale;
    mm.quat_scale /= scale;
    mm.convergence_tol /= scale;
    const auto direct = two_stage_pipeline(raw, mm, m);
    const auto normalized = estimate_poses(pred, m, {}, false);
    CHECK(partition(direct.labels) == partition(normalized.labels));
  }
}

TEST_CASE("crossing rods split in stage 1 only with rotation features") {
  const ObjectModel rod = rod_model();
  const Scene scene = make_crossing_rods_scene(rod, 0.0, 90.0);
  const auto pred = oracle_predict(scene, rod, {});
  const NormalizedScene ns = normalize_scene(pred.positions, fit_normalization(rod.cloud));
  PerPointPrediction np = pred;
  np.positions = ns.points;
  for (auto& c : np.centroids) c = ns.transform.to_normalized(c);
  const ClusterParams params;
  const MeanShiftParams ms{params.bandwidth_1, params.min_points_1};
  CHECK(mean_shift(stage1_features(np, 20.0), ms).clusters.size() == 2);
  CHECK(mean_shift(stage1_features(np, 0.0), ms).clusters.size() == 1);
}

TEST_CASE("ICP fixed point and convergence") {
  const ObjectModel m = blob_model();
  std::mt19937_64 rng(49);
  const Pose gt = random_pose(rng, 100.0);
  PointCloud scene;
  for (const auto& p : m.cloud) scene.push_back(gt.apply(p));

  const IcpResult same = icp_refine(scene, m.cloud, gt);
  CHECK_FALSE(same.failed);
  CHECK(same.iterations <= 1);
  CHECK((same.pose.translation - gt.translation).norm() < 1e-9);

  for (int trial = 0; trial < 20; ++trial) {
    const Pose init = Pose::from_matrix(gt.matrix() * rodrigues(unit_vector(rng), 2.0),
                                        gt.translation + 2.0 * unit_vector(rng));
    const IcpResult r = icp_refine(scene, m.cloud, init);
    CHECK_FALSE(r.failed);
    for (std::size_t k = 1; k < r.errors.size(); ++k) CHECK(r.errors[k] <= r.errors[k - 1]);
    const double before = symmetric_pose_distance(m.cloud, gt, init, m.group, m.mask).mean;
    const double after = symmetric_pose_distance(m.cloud, gt, r.pose, m.group, m.mask).mean;
    CHECK(after <= 0.1 * before);
  }
}

TEST_CASE("ICP lands on a symmetric equivalent from far away") {
  const ObjectModel m = four_fold_model();
  const Pose gt = Pose::from_matrix(rodrigues(Vec3(0.2, 0.1, 1), 20), Vec3(5, 5, 40));
  PointCloud scene;
  for (const auto& p : m.cloud) scene.push_back(gt.apply(p));
  // 88 degrees about z is 2 degrees from the 90 degree equivalent.
  const Pose init = Pose::from_matrix(gt.matrix() * rodrigues(Vec3::UnitZ(), 88.0), gt.translation);
  const IcpResult r = icp_refine(scene, m.cloud, init);
  CHECK(symmetric_pose_distance(m.cloud, gt, r.pose, m.group, m.mask).mean < 0.1);
  CHECK(symmetric_pose_distance(m.cloud, gt, r.pose, build_symmetry_group({}), {}).mean > 10.0);
}

TEST_CASE("ICP degenerate correspondences") {
  const ObjectModel m = blob_model();
  const PointCloud scene(30, Vec3(1, 2, 3));
  const Pose init = Pose::from_matrix(Mat3::Identity(), Vec3(1, 2, 3));
  const IcpResult r = icp_refine(scene, m.cloud, init);
  CHECK(r.failed);
  CHECK(r.pose.translation == init.translation);
  CHECK_THROWS_AS(icp_refine({}, m.cloud, init), InvalidArgument);
}
