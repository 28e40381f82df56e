#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "symbin/cluster.hpp"
#include "symbin/metrics.hpp"
#include "symbin/synth.hpp"

namespace symbin {

/// Which object the run is about: a built-in model ("builtin:<name>") or an
/// ASCII PLY file, plus its symmetry.
struct ObjectConfig {
  std::string model = "builtin:two_fold";
  std::optional<std::filesystem::path> model_path;  // resolved file for non-builtin models
  std::optional<SymmetryDescriptor> symmetry;       // overrides the built-in default
};

struct Config {
  ObjectConfig object;
  ClusterParams cluster;
  EvalConfig eval;
  SceneGenParams synth;
  OracleParams oracle;
  IcpParams icp;
};

/// Parses a config document. Unknown keys, bad types and violated parameter
/// constraints are rejected with ParseError; relative model paths resolve
/// against `base_dir` and must exist.
Config parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
Config load_config(const std::filesystem::path& path);

nlohmann::json config_to_json(const Config& config);

ObjectModel load_object_model(const ObjectConfig& object);

}  // namespace symbin
