#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "symbin/config.hpp"

namespace symbin {

/// Failure inside one pipeline stage; what() is prefixed with "[stage] ".
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PoseEstimates {
  std::vector<Pose> poses;                 // scene millimeters
  std::vector<std::size_t> member_counts;
  std::vector<int> labels;                 // instance id per input point, -1 = unassigned
  std::size_t stage1_clusters = 0;
  std::vector<bool> icp_failed;            // per pose, empty when ICP was not run
};

/// Normalizes the predictions, clusters them and maps the voted poses back to
/// scene millimeters. With `icp`, every pose is refined against the input
/// points of its members.
PoseEstimates estimate_poses(const PerPointPrediction& pred_mm, const ObjectModel& model,
                             const ClusterParams& params, bool single_stage,
                             const std::optional<IcpParams>& icp = std::nullopt);

struct PipelineOptions {
  bool single_stage = false;
  bool icp = false;
  std::size_t scenes = 1;
  std::size_t threads = 0;  // 0 = hardware concurrency
  std::optional<std::filesystem::path> out_dir;
};

struct SceneRun {
  Scene scene;
  PerPointPrediction prediction;
  PoseEstimates estimates;
  EvalReport report;
};

/// Seeds used for scene `index` of a run started with `seed`.
std::uint64_t scene_seed(std::uint64_t seed, std::size_t index);
std::uint64_t oracle_seed(std::uint64_t seed, std::size_t index);

/// synth -> occlusion -> oracle -> normalize -> cluster -> denormalize ->
/// (icp) -> eval for a single scene.
SceneRun run_scene(const Config& config, const ObjectModel& model, std::uint64_t seed,
                   std::size_t index, const PipelineOptions& options);

/// Runs options.scenes scenes (concurrently when threads > 1) and pools their
/// reports. With out_dir set, per-scene artifacts go to out_dir/scene_<k>/ and
/// report.json, scenes.csv and config.json to out_dir.
EvalReport run_pipeline(const Config& config, std::uint64_t seed, const PipelineOptions& options);

/// Writes scene.ply/.json, predictions.csv, poses.json, labels.txt and report.json.
void write_scene_artifacts(const std::filesystem::path& dir, const SceneRun& run,
                           const std::string& model_name);

}  // namespace symbin
