#include "symbin/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace symbin {

namespace {

void append(PointCloud& dst, const PointCloud& src, const Vec3& offset = Vec3::Zero()) {
  for (const auto& p : src) dst.push_back(p + offset);
}

// Ring of points around z, angularly uniform, starting at angle 0.
void append_ring(PointCloud& dst, double radius, double z, double pitch) {
  const auto n = std::max<std::size_t>(
      6, static_cast<std::size_t>(std::lround(2.0 * std::numbers::pi * radius / pitch)));
  for (std::size_t k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    dst.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
  }
}

// Filled disk at height z as concentric rings.
void append_disk(PointCloud& dst, double radius, double z, double pitch) {
  dst.emplace_back(0.0, 0.0, z);
  for (double r = pitch; r <= radius + 1e-9; r += pitch) append_ring(dst, r, z, pitch);
}

long long cell_key(const Vec3& p, double cell) {
  return (static_cast<long long>(std::floor(p.x() / cell)) << 32) ^
         (static_cast<long long>(std::floor(p.y() / cell)) & 0xffffffffLL);
}

std::unordered_map<long long, double> cell_tops(const PointCloud& cloud, double cell) {
  std::unordered_map<long long, double> tops;
  for (const auto& p : cloud) {
    auto [it, inserted] = tops.try_emplace(cell_key(p, cell), p.z());
    if (!inserted) it->second = std::max(it->second, p.z());
  }
  return tops;
}

void refresh_normalization(Scene& scene, const ObjectModel& model) {
  scene.normalization.scale = fit_normalization(model.cloud).scale;
  scene.normalization.scene_offset = centroid(scene.cloud);
}

Scene build_scene(const ObjectModel& model, const std::vector<Pose>& poses, const Vec3& bin) {
  Scene scene;
  scene.bin_extent = bin;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    SceneInstance inst;
    inst.gt = poses[i];
    const Mat3 r = poses[i].matrix();
    for (std::size_t m = 0; m < model.cloud.size(); ++m) {
      scene.cloud.push_back(r * model.cloud[m] + poses[i].translation);
      scene.labels.push_back(static_cast<int>(i));
      scene.model_index.push_back(m);
      inst.visible.push_back(m);
    }
    inst.visible_count = inst.visible.size();
    scene.instances.push_back(std::move(inst));
  }
  refresh_normalization(scene, model);
  return scene;
}

}  // namespace

PointCloud sample_box_surface(const Vec3& size, double pitch) {
  if (!(pitch > 0.0) || !(size.minCoeff() > 0.0)) {
    throw InvalidArgument("box sampling needs positive size and pitch");
  }
  PointCloud out;
  for (int a = 0; a < 3; ++a) {
    const int u = (a + 1) % 3;
    const int v = (a + 2) % 3;
    const auto nu = std::max<long>(1, std::lround(size[u] / pitch));
    const auto nv = std::max<long>(1, std::lround(size[v] / pitch));
    for (double sign : {-1.0, 1.0}) {
      for (long i = 0; i < nu; ++i) {
        for (long j = 0; j < nv; ++j) {
          Vec3 p;
          p[a] = sign * size[a] / 2.0;
          p[u] = -size[u] / 2.0 + (static_cast<double>(i) + 0.5) * size[u] / static_cast<double>(nu);
          p[v] = -size[v] / 2.0 + (static_cast<double>(j) + 0.5) * size[v] / static_cast<double>(nv);
          out.push_back(p);
        }
      }
    }
  }
  return out;
}

ObjectModel rod_model(double pitch) {
  return ObjectModel::make("rod", sample_box_surface({400.0, 10.0, 10.0}, pitch), {90, 180, 0, 15});
}

ObjectModel two_fold_model(double pitch) {
  PointCloud cloud = sample_box_surface({60.0, 30.0, 20.0}, pitch);
  append(cloud, sample_box_surface({20.0, 10.0, 10.0}, pitch), {0.0, 0.0, 15.0});
  return ObjectModel::make("two_fold", std::move(cloud), {0, 0, 180, 15});
}

ObjectModel four_fold_model(double pitch) {
  PointCloud cloud = sample_box_surface({40.0, 40.0, 10.0}, pitch);
  append(cloud, sample_box_surface({10.0, 10.0, 10.0}, pitch), {0.0, 0.0, 10.0});
  return ObjectModel::make("four_fold", std::move(cloud), {0, 0, 90, 15});
}

ObjectModel candlestick_model(double pitch) {
  PointCloud cloud;
  for (double z = 0.0; z <= 60.0 + 1e-9; z += pitch) append_ring(cloud, 15.0, z, pitch);
  append_disk(cloud, 15.0, 60.0, pitch);
  append_disk(cloud, 25.0, 0.0, pitch);
  append_disk(cloud, 25.0, -4.0, pitch);
  append_ring(cloud, 25.0, -2.0, pitch);
  return ObjectModel::make("candlestick", std::move(cloud), {0, 0, 1, 15});
}

ObjectModel blob_model(std::size_t points) {
  PointCloud cloud;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t k = 0; k < points; ++k) {
    const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(points);
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * static_cast<double>(k);
    const Vec3 u(r * std::cos(phi), r * std::sin(phi), z);
    const double bump = 1.0 + 0.25 * std::pow(std::max(0.0, u.x()), 2) + 0.15 * u.y() * u.z() +
                        0.1 * u.z();
    cloud.push_back(Vec3(30.0 * u.x(), 20.0 * u.y(), 14.0 * u.z()) * bump);
  }
  return ObjectModel::make("blob", std::move(cloud), {0, 0, 0, 15});
}

ObjectModel builtin_model(const std::string& name) {
  if (name == "rod") return rod_model();
  if (name == "two_fold") return two_fold_model();
  if (name == "four_fold") return four_fold_model();
  if (name == "candlestick") return candlestick_model();
  if (name == "blob") return blob_model();
  throw InvalidArgument("unknown built-in model '" + name + "'");
}

void SceneGenParams::validate() const {
  if (!(bin_extent.minCoeff() > 0.0)) throw InvalidArgument("bin extents must be positive");
  if (!(occlusion_cell > 0.0)) throw InvalidArgument("occlusion cell must be positive");
  if (depth_tolerance < 0.0) throw InvalidArgument("depth tolerance must be non-negative");
  if (min_instances == 0 || max_instances < min_instances) {
    throw InvalidArgument("instance count range must satisfy 1 <= min <= max");
  }
  if (placement_attempts == 0) throw InvalidArgument("placement attempts must be positive");
}

std::vector<Pose> Scene::gt_poses() const {
  std::vector<Pose> out;
  for (const auto& i : instances) out.push_back(i.gt);
  return out;
}

std::vector<std::size_t> Scene::visible_counts() const {
  std::vector<std::size_t> out;
  for (const auto& i : instances) out.push_back(i.visible_count);
  return out;
}

PointCloud Scene::instance_points(std::size_t instance) const {
  PointCloud out;
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    if (labels[k] == static_cast<int>(instance)) out.push_back(cloud[k]);
  }
  return out;
}

Scene generate_scene(const ObjectModel& model, const SceneGenParams& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> count_dist(params.min_instances, params.max_instances);
  std::uniform_real_distribution<double> angle(-180.0, 180.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  const double r = model.bounding_radius;
  const double min_sep = 2.0 * r;
  const double hx = std::max(0.0, params.bin_extent.x() / 2.0 - r);
  const double hy = std::max(0.0, params.bin_extent.y() / 2.0 - r);
  const double height = params.bin_extent.z();

  const std::size_t wanted = count_dist(rng);
  std::vector<Pose> poses;
  std::vector<Vec3> centers;
  for (std::size_t n = 0; n < wanted; ++n) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < params.placement_attempts && !placed; ++attempt) {
      const Mat3 rot = axis_angle_matrix(Vec3::UnitZ(), angle(rng)) *
                       axis_angle_matrix(Vec3::UnitY(), angle(rng)) *
                       axis_angle_matrix(Vec3::UnitX(), angle(rng));
      const double x = hx * unit(rng);
      const double y = hy * unit(rng);

      std::vector<double> candidates{r};
      for (const auto& c : centers) {
        const double dxy2 = (c.x() - x) * (c.x() - x) + (c.y() - y) * (c.y() - y);
        if (dxy2 < min_sep * min_sep) candidates.push_back(c.z() + std::sqrt(min_sep * min_sep - dxy2));
      }
      std::sort(candidates.begin(), candidates.end());
      for (double z : candidates) {
        if (z < r) continue;
        const Vec3 c(x, y, z);
        const bool clear = std::all_of(centers.begin(), centers.end(), [&](const Vec3& o) {
          return (o - c).norm() >= min_sep * (1.0 - 1e-12);
        });
        if (!clear) continue;
        if (z + r <= height) {
          centers.push_back(c);
          poses.push_back(Pose::from_matrix(rot, c));
          placed = true;
        }
        break;
      }
    }
  }
  if (poses.empty()) throw GenerationFailed("no instance could be placed in the bin");
  Scene scene = build_scene(model, poses, params.bin_extent);
  scene.seed = params.seed;
  return scene;
}

Scene scene_from_poses(const ObjectModel& model, const std::vector<Pose>& poses,
                       const Vec3& bin_extent) {
  if (poses.empty()) throw InvalidArgument("scene needs at least one pose");
  return build_scene(model, poses, bin_extent);
}

Scene apply_occlusion(const Scene& scene, double cell, double depth_tolerance) {
  if (!(cell > 0.0)) throw InvalidArgument("occlusion cell must be positive");
  const auto tops = cell_tops(scene.cloud, cell);
  Scene out;
  out.seed = scene.seed;
  out.bin_extent = scene.bin_extent;
  out.normalization = scene.normalization;
  out.instances = scene.instances;
  for (auto& inst : out.instances) {
    inst.visible.clear();
    inst.visible_count = 0;
  }
  for (std::size_t k = 0; k < scene.cloud.size(); ++k) {
    const Vec3& p = scene.cloud[k];
    if (p.z() < tops.at(cell_key(p, cell)) - depth_tolerance) continue;
    out.cloud.push_back(p);
    out.labels.push_back(scene.labels[k]);
    out.model_index.push_back(scene.model_index[k]);
    auto& inst = out.instances[static_cast<std::size_t>(scene.labels[k])];
    inst.visible.push_back(scene.model_index[k]);
    ++inst.visible_count;
  }
  out.normalization.scene_offset = centroid(out.cloud);
  return out;
}

Scene make_crossing_rods_scene(const ObjectModel& rod, double separation, double angle_deg) {
  const double lift = rod.bbox.z() / 2.0;
  const std::vector<Pose> poses{
      Pose{Quaternion::identity(), Vec3(0.0, -separation / 2.0, lift)},
      Pose::from_matrix(axis_angle_matrix(Vec3::UnitZ(), angle_deg),
                        Vec3(0.0, separation / 2.0, lift)),
  };
  const double span = rod.bbox.maxCoeff() + separation + 100.0;
  return build_scene(rod, poses, Vec3(span, span, 200.0));
}

void OracleParams::validate() const {
  if (sigma_t < 0.0 || sigma_r_deg < 0.0) throw InvalidArgument("oracle noise must be non-negative");
  if (outlier_fraction < 0.0 || outlier_fraction >= 1.0) {
    throw InvalidArgument("outlier fraction must lie in [0, 1)");
  }
}

Mat3 random_axis_rotation(std::mt19937_64& rng, double degrees) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec3 axis;
  do {
    axis = Vec3(gauss(rng), gauss(rng), gauss(rng));
  } while (axis.norm() < 1e-9);
  return axis_angle_matrix(axis, degrees);
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec4 q;
  do {
    q = Vec4(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  } while (q.norm() < 1e-9);
  return quat_to_matrix(Quaternion::normalized(q));
}

PerPointPrediction oracle_predict(const Scene& scene, const ObjectModel& model,
                                  const OracleParams& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_s(0, model.group.size() - 1);

  int spin_axis = -1;
  if (params.infinite_spin && model.mask.v.sum() == 1.0) {
    model.mask.v.maxCoeff(&spin_axis);
  }
  std::vector<Mat3> gt_rot;
  for (const auto& inst : scene.instances) gt_rot.push_back(inst.gt.matrix());

  PerPointPrediction pred;
  pred.positions = scene.cloud;
  for (std::size_t k = 0; k < scene.cloud.size(); ++k) {
    if (scene.labels[k] < 0) throw InvalidArgument("oracle needs labelled scene points");
    const auto i = static_cast<std::size_t>(scene.labels[k]);
    const SceneInstance& inst = scene.instances[i];

    if (uniform(rng) < params.outlier_fraction) {
      const Vec3& bin = scene.bin_extent;
      pred.centroids.emplace_back((uniform(rng) - 0.5) * bin.x(), (uniform(rng) - 0.5) * bin.y(),
                                  uniform(rng) * bin.z());
      pred.quats.push_back(matrix_to_quat(random_rotation(rng)));
      continue;
    }

    pred.centroids.push_back(inst.gt.translation +
                             params.sigma_t * Vec3(gauss(rng), gauss(rng), gauss(rng)));
    Mat3 r = gt_rot[i];
    bool modified = false;
    if (params.symmetric_ambiguity) {
      const std::size_t s = pick_s(rng);
      if (s != 0) {
        r = r * model.group.matrices[s];
        modified = true;
      }
    }
    if (spin_axis >= 0) {
      r = r * axis_angle_matrix(Vec3::Unit(spin_axis), 360.0 * uniform(rng));
      modified = true;
    }
    if (params.sigma_r_deg > 0.0) {
      r = r * random_axis_rotation(rng, params.sigma_r_deg * gauss(rng));
      modified = true;
    }
    pred.quats.push_back(modified ? matrix_to_quat(r) : inst.gt.rotation);
  }
  return pred;
}

}  // namespace symbin
