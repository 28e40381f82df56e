#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "symbin/cluster.hpp"
#include "symbin/metrics.hpp"
#include "symbin/synth.hpp"

namespace symbin {

inline constexpr int kSceneSchemaVersion = 1;

/// Scene sidecar: {schema_version, seed, model, bin_extent, normalization
/// {scale, scene_offset}, instances [{qw, qx, qy, qz, tx, ty, tz, visible_count}]}.
nlohmann::json scene_to_json(const Scene& scene, const std::string& model_name);

/// Writes <stem>.ply (x y z instance_id) and <stem>.json next to each other.
void save_scene(const std::filesystem::path& ply_path, const Scene& scene,
                const std::string& model_name);
/// Reads a scene back from its PLY and JSON sidecar. Per-instance visible
/// index lists are not stored, only the counts.
Scene load_scene(const std::filesystem::path& ply_path, const std::filesystem::path& json_path);
/// Ground truth only (no cloud or labels) from a scene JSON sidecar.
Scene load_scene_sidecar(const std::filesystem::path& json_path);

/// CSV with header x,y,z,cx,cy,cz,qw,qx,qy,qz, one row per point.
void save_predictions_csv(const std::filesystem::path& path, const PerPointPrediction& pred);
PerPointPrediction load_predictions_csv(const std::filesystem::path& path);

/// JSON array of {qw, qx, qy, qz, tx, ty, tz, member_count}.
nlohmann::json poses_to_json(const std::vector<Pose>& poses,
                             const std::vector<std::size_t>& member_counts);
void save_poses_json(const std::filesystem::path& path, const std::vector<Pose>& poses,
                     const std::vector<std::size_t>& member_counts);
std::vector<Pose> load_poses_json(const std::filesystem::path& path);

/// One instance id per line, -1 for unassigned points.
void save_labels(const std::filesystem::path& path, const std::vector<int>& labels);
std::vector<int> load_labels(const std::filesystem::path& path);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
void save_report(const std::filesystem::path& path, const EvalReport& report);

/// Header line and row (both newline-terminated) for per-scene CSV aggregation.
std::string report_csv_header();
std::string report_csv_row(const std::string& scene, const EvalReport& report);

/// Writes `text` to `path`, throwing on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace symbin
