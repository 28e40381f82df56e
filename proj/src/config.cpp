#include "symbin/config.hpp"

#include <set>

#include "symbin/formats.hpp"
#include "symbin/ply.hpp"

namespace symbin {

using nlohmann::json;

namespace {

constexpr std::string_view kBuiltinPrefix = "builtin:";

void reject_unknown(const json& section, const std::string& name,
                    const std::set<std::string>& allowed) {
  if (!section.is_object()) throw ParseError("config section '" + name + "' must be an object", 0);
  for (const auto& [key, value] : section.items()) {
    if (!allowed.count(key)) throw ParseError("unknown config key '" + name + "." + key + "'", 0);
  }
}

template <typename T>
void read(const json& section, const char* key, T& out) {
  if (section.contains(key)) out = section.at(key).get<T>();
}

Vec3 read_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-element array", 0);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

Config parse_config(const json& j, const std::filesystem::path& base_dir) {
  Config c;
  try {
    reject_unknown(j, "config", {"object", "cluster", "eval", "synth", "oracle", "icp"});

    if (j.contains("object")) {
      const auto& o = j.at("object");
      reject_unknown(o, "object", {"model", "dx_deg", "dy_deg", "dz_deg", "ts_deg"});
      read(o, "model", c.object.model);
      if (o.contains("dx_deg") || o.contains("dy_deg") || o.contains("dz_deg") ||
          o.contains("ts_deg")) {
        SymmetryDescriptor d;
        read(o, "dx_deg", d.dx_deg);
        read(o, "dy_deg", d.dy_deg);
        read(o, "dz_deg", d.dz_deg);
        read(o, "ts_deg", d.ts_deg);
        d.validate();
        build_axis_mask(d);
        build_symmetry_group(d);
        c.object.symmetry = d;
      }
    }
    if (!c.object.model.starts_with(kBuiltinPrefix)) {
      std::filesystem::path p = c.object.model;
      if (p.is_relative()) p = base_dir / p;
      if (!std::filesystem::exists(p)) {
        throw ParseError("model file '" + p.string() + "' does not exist", 0);
      }
      c.object.model_path = p;
    }

    if (j.contains("cluster")) {
      const auto& s = j.at("cluster");
      reject_unknown(s, "cluster",
                     {"bandwidth_1", "bandwidth_2", "min_points_1", "min_points_2", "quat_scale",
                      "max_iters", "convergence_tol"});
      read(s, "bandwidth_1", c.cluster.bandwidth_1);
      read(s, "bandwidth_2", c.cluster.bandwidth_2);
      read(s, "min_points_1", c.cluster.min_points_1);
      read(s, "min_points_2", c.cluster.min_points_2);
      read(s, "quat_scale", c.cluster.quat_scale);
      read(s, "max_iters", c.cluster.max_iters);
      read(s, "convergence_tol", c.cluster.convergence_tol);
    }
    c.cluster.validate();

    if (j.contains("eval")) {
      const auto& s = j.at("eval");
      reject_unknown(s, "eval", {"t_e", "t_v"});
      read(s, "t_e", c.eval.t_e);
      read(s, "t_v", c.eval.t_v);
    }
    c.eval.validate();

    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      reject_unknown(s, "synth",
                     {"min_instances", "max_instances", "bin_extent", "placement_attempts",
                      "occlusion_cell", "depth_tolerance", "seed"});
      read(s, "min_instances", c.synth.min_instances);
      read(s, "max_instances", c.synth.max_instances);
      if (s.contains("bin_extent")) c.synth.bin_extent = read_vec3(s.at("bin_extent"));
      read(s, "placement_attempts", c.synth.placement_attempts);
      read(s, "occlusion_cell", c.synth.occlusion_cell);
      read(s, "depth_tolerance", c.synth.depth_tolerance);
      read(s, "seed", c.synth.seed);
    }
    c.synth.validate();

    if (j.contains("oracle")) {
      const auto& s = j.at("oracle");
      reject_unknown(s, "oracle",
                     {"sigma_t", "sigma_r_deg", "symmetric_ambiguity", "infinite_spin",
                      "outlier_fraction", "seed"});
      read(s, "sigma_t", c.oracle.sigma_t);
      read(s, "sigma_r_deg", c.oracle.sigma_r_deg);
      read(s, "symmetric_ambiguity", c.oracle.symmetric_ambiguity);
      read(s, "infinite_spin", c.oracle.infinite_spin);
      read(s, "outlier_fraction", c.oracle.outlier_fraction);
      read(s, "seed", c.oracle.seed);
    }
    c.oracle.validate();

    if (j.contains("icp")) {
      const auto& s = j.at("icp");
      reject_unknown(s, "icp", {"max_iters", "tol"});
      read(s, "max_iters", c.icp.max_iters);
      read(s, "tol", c.icp.tol);
    }
    if (c.icp.max_iters <= 0 || c.icp.tol < 0.0) throw ParseError("invalid icp parameters", 0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  } catch (const UnsupportedSymmetry& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  return parse_config(j, path.parent_path());
}

json config_to_json(const Config& c) {
  json object = {{"model", c.object.model_path ? c.object.model_path->string() : c.object.model}};
  if (c.object.symmetry) {
    object["dx_deg"] = c.object.symmetry->dx_deg;
    object["dy_deg"] = c.object.symmetry->dy_deg;
    object["dz_deg"] = c.object.symmetry->dz_deg;
    object["ts_deg"] = c.object.symmetry->ts_deg;
  }
  const auto& b = c.synth.bin_extent;
  return {
      {"object", object},
      {"cluster",
       {{"bandwidth_1", c.cluster.bandwidth_1},
        {"bandwidth_2", c.cluster.bandwidth_2},
        {"min_points_1", c.cluster.min_points_1},
        {"min_points_2", c.cluster.min_points_2},
        {"quat_scale", c.cluster.quat_scale},
        {"max_iters", c.cluster.max_iters},
        {"convergence_tol", c.cluster.convergence_tol}}},
      {"eval", {{"t_e", c.eval.t_e}, {"t_v", c.eval.t_v}}},
      {"synth",
       {{"min_instances", c.synth.min_instances},
        {"max_instances", c.synth.max_instances},
        {"bin_extent", json::array({b.x(), b.y(), b.z()})},
        {"placement_attempts", c.synth.placement_attempts},
        {"occlusion_cell", c.synth.occlusion_cell},
        {"depth_tolerance", c.synth.depth_tolerance},
        {"seed", c.synth.seed}}},
      {"oracle",
       {{"sigma_t", c.oracle.sigma_t},
        {"sigma_r_deg", c.oracle.sigma_r_deg},
        {"symmetric_ambiguity", c.oracle.symmetric_ambiguity},
        {"infinite_spin", c.oracle.infinite_spin},
        {"outlier_fraction", c.oracle.outlier_fraction},
        {"seed", c.oracle.seed}}},
      {"icp", {{"max_iters", c.icp.max_iters}, {"tol", c.icp.tol}}},
  };
}

ObjectModel load_object_model(const ObjectConfig& object) {
  if (object.model.starts_with(kBuiltinPrefix)) {
    ObjectModel m = builtin_model(object.model.substr(kBuiltinPrefix.size()));
    if (object.symmetry) m = ObjectModel::make(m.name, m.cloud, *object.symmetry);
    return m;
  }
  if (!object.model_path) throw InvalidArgument("object model path was not resolved");
  const PlyCloud ply = load_ply(*object.model_path);
  return ObjectModel::make(object.model_path->stem().string(), ply.points,
                           object.symmetry.value_or(SymmetryDescriptor{}));
}

}  // namespace symbin
