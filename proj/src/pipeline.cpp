#include "symbin/pipeline.hpp"

#include <atomic>
#include <exception>
#include <sstream>
#include <thread>

#include "symbin/formats.hpp"
#include "symbin/workspace.hpp"

namespace symbin {

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

PoseEstimates estimate_poses(const PerPointPrediction& pred_mm, const ObjectModel& model,
                             const ClusterParams& params, bool single_stage,
                             const std::optional<IcpParams>& icp) {
  pred_mm.validate();
  const NormalizationTransform scale_only = fit_normalization(model.cloud);
  const NormalizedScene ns = normalize_scene(pred_mm.positions, scale_only);
  const NormalizationTransform& t = ns.transform;

  PerPointPrediction pred;
  pred.positions = ns.points;
  pred.quats = pred_mm.quats;
  pred.centroids.reserve(pred_mm.size());
  for (const auto& c : pred_mm.centroids) pred.centroids.push_back(t.to_normalized(c));

  ClusterResult clusters;
  if (single_stage) {
    clusters = single_stage_pipeline(pred, params);
  } else {
    const ObjectModel scaled =
        ObjectModel::make(model.name, scale_cloud(model.cloud, t.scale), model.symmetry);
    clusters = two_stage_pipeline(pred, params, scaled);
  }

  PoseEstimates out;
  out.labels = clusters.labels;
  out.stage1_clusters = clusters.stage1.size();
  for (const auto& inst : clusters.instances) {
    out.poses.push_back(denormalize_pose(inst.pose, t));
    out.member_counts.push_back(inst.members.size());
  }
  if (icp) {
    for (std::size_t k = 0; k < out.poses.size(); ++k) {
      PointCloud pts;
      for (auto i : clusters.instances[k].members) pts.push_back(pred_mm.positions[i]);
      const IcpResult r = icp_refine(pts, model.cloud, out.poses[k], *icp);
      out.poses[k] = r.pose;
      out.icp_failed.push_back(r.failed);
    }
  }
  return out;
}

std::uint64_t scene_seed(std::uint64_t seed, std::size_t index) {
  return seed + static_cast<std::uint64_t>(index);
}

std::uint64_t oracle_seed(std::uint64_t seed, std::size_t index) {
  // Distinct stream from the scene generator for the same index.
  return (seed ^ 0x9E3779B97F4A7C15ULL) + 0x632BE59BD9B4E019ULL * (index + 1);
}

SceneRun run_scene(const Config& config, const ObjectModel& model, std::uint64_t seed,
                   std::size_t index, const PipelineOptions& options) {
  SceneRun run;
  run.scene = stage("synth", [&] {
    SceneGenParams p = config.synth;
    p.seed = scene_seed(seed, index);
    return apply_occlusion(generate_scene(model, p), p.occlusion_cell, p.depth_tolerance);
  });
  run.prediction = stage("oracle", [&] {
    OracleParams p = config.oracle;
    p.seed = oracle_seed(seed, index);
    return oracle_predict(run.scene, model, p);
  });
  run.estimates = stage("cluster", [&] {
    std::optional<IcpParams> icp;
    if (options.icp) icp = config.icp;
    return estimate_poses(run.prediction, model, config.cluster, options.single_stage, icp);
  });
  run.report = stage("eval", [&] {
    const auto gts = run.scene.gt_poses();
    const auto counts = run.scene.visible_counts();
    return evaluate(gts, counts, run.estimates.poses, model, config.eval);
  });
  return run;
}

void write_scene_artifacts(const std::filesystem::path& dir, const SceneRun& run,
                           const std::string& model_name) {
  std::filesystem::create_directories(dir);
  save_scene(dir / "scene.ply", run.scene, model_name);
  save_predictions_csv(dir / "predictions.csv", run.prediction);
  save_poses_json(dir / "poses.json", run.estimates.poses, run.estimates.member_counts);
  save_labels(dir / "labels.txt", run.estimates.labels);
  save_report(dir / "report.json", run.report);
}

EvalReport run_pipeline(const Config& config, std::uint64_t seed, const PipelineOptions& options) {
  if (options.scenes == 0) throw StageError("config", "scene count must be positive");
  const ObjectModel model = stage("config", [&] { return load_object_model(config.object); });

  std::vector<EvalReport> reports(options.scenes);
  std::vector<std::exception_ptr> errors(options.scenes);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < options.scenes; k = next++) {
      try {
        const SceneRun run = run_scene(config, model, seed, k, options);
        if (options.out_dir) {
          stage("write", [&] {
            std::ostringstream name;
            name << "scene_" << k;
            write_scene_artifacts(*options.out_dir / name.str(), run, model.name);
            return 0;
          });
        }
        reports[k] = run.report;
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };

  std::size_t threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max<std::size_t>(1, std::min(threads, options.scenes));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  // Report the lowest-index failure so the message does not depend on scheduling.
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const EvalReport total = aggregate_reports(reports);
  if (options.out_dir) {
    stage("write", [&] {
      save_report(*options.out_dir / "report.json", total);
      std::string csv = report_csv_header();
      for (std::size_t k = 0; k < reports.size(); ++k) {
        csv += report_csv_row("scene_" + std::to_string(k), reports[k]);
      }
      write_text(*options.out_dir / "scenes.csv", csv);
      write_text(*options.out_dir / "config.json", config_to_json(config).dump(2) + "\n");
      return 0;
    });
  }
  return total;
}

}  // namespace symbin
