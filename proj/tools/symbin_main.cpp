// Command-line front end: synth, oracle, cluster, eval, gradcheck, pipeline.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "symbin/config.hpp"
#include "symbin/formats.hpp"
#include "symbin/loss.hpp"
#include "symbin/pipeline.hpp"

namespace fs = std::filesystem;
using namespace symbin;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  bool single_stage = false;
  bool icp = false;
};

Config read_config(const Common& c) {
  try {
    return c.config.empty() ? Config{} : load_config(c.config);
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
}

fs::path prepare_out_dir(const Common& c) {
  fs::path dir = c.out_dir;
  fs::create_directories(dir);
  return dir;
}

fs::path sidecar_of(const fs::path& ply) {
  fs::path j = ply;
  j.replace_extension(".json");
  return j;
}

template <typename F>
auto tagged(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void add_common(CLI::App* app, Common& c, bool with_modes) {
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--out-dir", c.out_dir, "Output directory");
  if (with_modes) {
    app->add_flag("--single-stage", c.single_stage, "Translation-only clustering (ablation)");
    app->add_flag("--icp", c.icp, "Refine voted poses with ICP");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetry-aware instance pose estimation for bin picking"};
  app.require_subcommand(1);

  Common common;

  auto* synth = app.add_subcommand("synth", "Generate an occluded synthetic scene");
  add_common(synth, common, false);

  auto* oracle = app.add_subcommand("oracle", "Emulate per-point predictions for a scene");
  add_common(oracle, common, false);
  std::string oracle_scene;
  oracle->add_option("--scene", oracle_scene, "Scene PLY (sidecar JSON next to it)")
      ->required()
      ->check(CLI::ExistingFile);

  auto* cluster = app.add_subcommand("cluster", "Cluster predictions into instance poses");
  add_common(cluster, common, true);
  std::string cluster_pred;
  cluster->add_option("--predictions", cluster_pred, "Prediction CSV")
      ->required()
      ->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Score predicted poses against a scene");
  add_common(eval, common, false);
  std::string eval_scene, eval_poses;
  eval->add_option("--scene", eval_scene, "Scene JSON sidecar")->required()->check(CLI::ExistingFile);
  eval->add_option("--poses", eval_poses, "Predicted poses JSON")->required()->check(CLI::ExistingFile);

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic and numeric loss gradients");
  add_common(grad, common, false);
  std::string grad_loss = "total";
  std::size_t grad_trials = 50;
  double grad_eps = 1e-5;
  grad->add_option("--loss", grad_loss, "rotation, translation or total")
      ->check(CLI::IsMember({"rotation", "translation", "total"}));
  grad->add_option("--trials", grad_trials, "Random configurations")->check(CLI::PositiveNumber);
  grad->add_option("--epsilon", grad_eps, "Finite-difference step")->check(CLI::PositiveNumber);

  auto* pipe = app.add_subcommand("pipeline", "synth -> oracle -> cluster -> eval over scenes");
  add_common(pipe, common, true);
  std::size_t scenes = 1;
  std::size_t threads = 0;
  pipe->add_option("--scenes", scenes, "Number of scenes")->check(CLI::PositiveNumber);
  pipe->add_option("--threads", threads, "Worker threads (0 = all cores)");

  CLI11_PARSE(app, argc, argv);

  try {
    const Config config = read_config(common);

    if (*synth) {
      const ObjectModel model = tagged("config", [&] { return load_object_model(config.object); });
      const Scene scene = tagged("synth", [&] {
        SceneGenParams p = config.synth;
        p.seed = common.seed;
        return apply_occlusion(generate_scene(model, p), p.occlusion_cell, p.depth_tolerance);
      });
      tagged("write", [&] {
        save_scene(prepare_out_dir(common) / "scene.ply", scene, model.name);
        return 0;
      });
    } else if (*oracle) {
      const ObjectModel model = tagged("config", [&] { return load_object_model(config.object); });
      const Scene scene = tagged("oracle", [&] { return load_scene(oracle_scene, sidecar_of(oracle_scene)); });
      const PerPointPrediction pred = tagged("oracle", [&] {
        OracleParams p = config.oracle;
        p.seed = common.seed;
        return oracle_predict(scene, model, p);
      });
      tagged("write", [&] {
        save_predictions_csv(prepare_out_dir(common) / "predictions.csv", pred);
        return 0;
      });
    } else if (*cluster) {
      const ObjectModel model = tagged("config", [&] { return load_object_model(config.object); });
      const PoseEstimates est = tagged("cluster", [&] {
        const PerPointPrediction pred = load_predictions_csv(cluster_pred);
        std::optional<IcpParams> icp;
        if (common.icp) icp = config.icp;
        return estimate_poses(pred, model, config.cluster, common.single_stage, icp);
      });
      tagged("write", [&] {
        const fs::path dir = prepare_out_dir(common);
        save_poses_json(dir / "poses.json", est.poses, est.member_counts);
        save_labels(dir / "labels.txt", est.labels);
        return 0;
      });
    } else if (*eval) {
      const ObjectModel model = tagged("config", [&] { return load_object_model(config.object); });
      const EvalReport report = tagged("eval", [&] {
        const Scene scene = load_scene_sidecar(eval_scene);
        const auto preds = load_poses_json(eval_poses);
        const auto gts = scene.gt_poses();
        const auto counts = scene.visible_counts();
        return evaluate(gts, counts, preds, model, config.eval);
      });
      tagged("write", [&] {
        const fs::path dir = prepare_out_dir(common);
        save_report(dir / "report.json", report);
        write_text(dir / "report.csv",
                   report_csv_header() + report_csv_row(fs::path(eval_scene).stem().string(), report));
        return 0;
      });
    } else if (*grad) {
      const LossKind kind = grad_loss == "rotation"      ? LossKind::rotation
                            : grad_loss == "translation" ? LossKind::translation
                                                         : LossKind::total;
      std::mt19937_64 rng(common.seed);
      double max_err = 0.0;
      double loss_sum = 0.0;
      std::size_t done = 0;
      tagged("gradcheck", [&] {
        for (std::size_t attempts = 0; done < grad_trials; ++attempts) {
          if (attempts > 100 * grad_trials) throw InvalidArgument("too many symmetry ties");
          const InstanceTargets targets = random_targets(rng);
          try {
            const GradcheckResult r = gradcheck(kind, targets, grad_eps);
            max_err = std::max(max_err, r.max_rel_err);
            loss_sum += r.loss;
            ++done;
          } catch (const SymmetryTie&) {
          }
        }
        return 0;
      });
      const nlohmann::json out = {{"loss", grad_loss},
                                  {"mean_loss", loss_sum / static_cast<double>(done)},
                                  {"max_rel_err", max_err},
                                  {"trials", done},
                                  {"epsilon", grad_eps}};
      std::cout << out.dump() << "\n";
    } else if (*pipe) {
      PipelineOptions opts;
      opts.single_stage = common.single_stage;
      opts.icp = common.icp;
      opts.scenes = scenes;
      opts.threads = threads;
      opts.out_dir = common.out_dir;
      fs::create_directories(*opts.out_dir);
      const EvalReport report = run_pipeline(config, common.seed, opts);
      std::cout << report_to_json(report).dump() << "\n";
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: [" << app.get_subcommands().front()->get_name() << "] " << e.what()
              << "\n";
    return 1;
  }
  return 0;
}
