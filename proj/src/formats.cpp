#include "symbin/formats.hpp"

#include <fstream>
#include <sstream>

#include "format_util.hpp"
#include "symbin/ply.hpp"

namespace symbin {

using nlohmann::json;

namespace {

json pose_json(const Pose& p) {
  return {{"qw", p.rotation.w()},    {"qx", p.rotation.x()},    {"qy", p.rotation.y()},
          {"qz", p.rotation.z()},    {"tx", p.translation.x()}, {"ty", p.translation.y()},
          {"tz", p.translation.z()}};
}

Pose pose_from_json(const json& j) {
  const Vec4 q(j.at("qw").get<double>(), j.at("qx").get<double>(), j.at("qy").get<double>(),
               j.at("qz").get<double>());
  return {Quaternion::from_unit(q),
          Vec3(j.at("tx").get<double>(), j.at("ty").get<double>(), j.at("tz").get<double>())};
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-element array", 0);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json parse_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InvalidArgument("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json scene_to_json(const Scene& scene, const std::string& model_name) {
  json instances = json::array();
  for (const auto& inst : scene.instances) {
    json j = pose_json(inst.gt);
    j["visible_count"] = inst.visible_count;
    instances.push_back(std::move(j));
  }
  return {{"schema_version", kSceneSchemaVersion},
          {"units", "mm"},
          {"seed", scene.seed},
          {"model", model_name},
          {"bin_extent", vec_json(scene.bin_extent)},
          {"normalization",
           {{"scale", scene.normalization.scale},
            {"scene_offset", vec_json(scene.normalization.scene_offset)}}},
          {"instances", std::move(instances)}};
}

void save_scene(const std::filesystem::path& ply_path, const Scene& scene,
                const std::string& model_name) {
  save_ply(ply_path, scene.cloud, &scene.labels);
  auto json_path = ply_path;
  json_path.replace_extension(".json");
  write_text(json_path, scene_to_json(scene, model_name).dump(2) + "\n");
}

Scene load_scene_sidecar(const std::filesystem::path& json_path) {
  const json j = parse_json_file(json_path);
  try {
    if (j.at("schema_version").get<int>() != kSceneSchemaVersion) {
      throw ParseError(json_path.string() + ": unsupported scene schema_version", 0);
    }
    Scene scene;
    scene.seed = j.at("seed").get<std::uint64_t>();
    scene.bin_extent = vec_from_json(j.at("bin_extent"));
    scene.normalization.scale = j.at("normalization").at("scale").get<double>();
    scene.normalization.scene_offset = vec_from_json(j.at("normalization").at("scene_offset"));
    for (const auto& ji : j.at("instances")) {
      SceneInstance inst;
      inst.gt = pose_from_json(ji);
      inst.visible_count = ji.at("visible_count").get<std::size_t>();
      scene.instances.push_back(std::move(inst));
    }
    return scene;
  } catch (const json::exception& e) {
    throw ParseError(json_path.string() + ": " + e.what(), 0);
  }
}

Scene load_scene(const std::filesystem::path& ply_path, const std::filesystem::path& json_path) {
  const PlyCloud ply = load_ply(ply_path);
  if (!ply.instance_ids) throw ParseError(ply_path.string() + ": scene PLY lacks instance_id", 0);
  Scene scene = load_scene_sidecar(json_path);
  scene.cloud = ply.points;
  scene.labels = *ply.instance_ids;
  std::vector<std::size_t> counted(scene.instances.size(), 0);
  for (int l : scene.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= scene.instances.size()) {
      throw ParseError(ply_path.string() + ": instance_id " + std::to_string(l) +
                           " has no entry in the sidecar",
                       0);
    }
    ++counted[static_cast<std::size_t>(l)];
  }
  for (std::size_t i = 0; i < counted.size(); ++i) {
    if (counted[i] != scene.instances[i].visible_count) {
      throw ParseError(json_path.string() + ": visible_count of instance " + std::to_string(i) +
                           " disagrees with the PLY labels",
                       0);
    }
  }
  return scene;
}

void save_predictions_csv(const std::filesystem::path& path, const PerPointPrediction& pred) {
  pred.validate();
  std::ostringstream out;
  out << "x,y,z,cx,cy,cz,qw,qx,qy,qz\n";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& p = pred.positions[i];
    const auto& c = pred.centroids[i];
    const auto& q = pred.quats[i];
    const double row[] = {p.x(), p.y(), p.z(), c.x(), c.y(), c.z(), q.w(), q.x(), q.y(), q.z()};
    for (int k = 0; k < 10; ++k) out << (k ? "," : "") << detail::format_double(row[k]);
    out << '\n';
  }
  write_text(path, out.str());
}

PerPointPrediction load_predictions_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty prediction file", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y,z,cx,cy,cz,qw,qx,qy,qz") {
    throw ParseError(path.string() + ": unexpected prediction header", 1);
  }
  PerPointPrediction pred;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v[10];
    std::size_t pos = 0;
    for (int k = 0; k < 10; ++k) {
      const std::size_t end = k < 9 ? line.find(',', pos) : line.size();
      if (end == std::string::npos) throw ParseError("expected 10 columns", line_no);
      const std::string tok = line.substr(pos, end - pos);
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v[k]);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ParseError("invalid number '" + tok + "'", line_no);
      }
      pos = end + 1;
    }
    if (pos <= line.size()) throw ParseError("expected 10 columns", line_no);
    pred.positions.emplace_back(v[0], v[1], v[2]);
    pred.centroids.emplace_back(v[3], v[4], v[5]);
    try {
      pred.quats.push_back(Quaternion::from_unit(Vec4(v[6], v[7], v[8], v[9])));
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return pred;
}

json poses_to_json(const std::vector<Pose>& poses, const std::vector<std::size_t>& member_counts) {
  if (member_counts.size() != poses.size()) {
    throw InvalidArgument("one member count per pose is required");
  }
  json out = json::array();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    json j = pose_json(poses[i]);
    j["member_count"] = member_counts[i];
    out.push_back(std::move(j));
  }
  return out;
}

void save_poses_json(const std::filesystem::path& path, const std::vector<Pose>& poses,
                     const std::vector<std::size_t>& member_counts) {
  write_text(path, poses_to_json(poses, member_counts).dump(2) + "\n");
}

std::vector<Pose> load_poses_json(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  if (!j.is_array()) throw ParseError(path.string() + ": poses file must be a JSON array", 0);
  std::vector<Pose> out;
  try {
    for (const auto& jp : j) out.push_back(pose_from_json(jp));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  return out;
}

void save_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::string text;
  for (int l : labels) text += std::to_string(l) + "\n";
  write_text(path, text);
}

std::vector<int> load_labels(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<int> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    int v = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      throw ParseError("invalid label '" + line + "'", line_no);
    }
    out.push_back(v);
  }
  return out;
}

json report_to_json(const EvalReport& report) {
  json per_instance = json::array();
  for (const auto& m : report.per_instance) {
    per_instance.push_back({{"pred", m.pred}, {"gt", m.gt}, {"distance", m.distance}, {"tp", m.tp}});
  }
  return {{"schema_version", EvalReport::kSchemaVersion},
          {"n_gt", report.n_gt},
          {"n_pred", report.n_pred},
          {"tp", report.tp},
          {"f1_inst", report.f1_inst},
          {"recall", report.recall},
          {"recall_hits", report.recall_counts.hits},
          {"recall_points", report.recall_counts.points},
          {"per_instance", std::move(per_instance)}};
}

EvalReport report_from_json(const json& j) {
  if (j.at("schema_version").get<int>() != EvalReport::kSchemaVersion) {
    throw ParseError("unsupported report schema_version", 0);
  }
  EvalReport r;
  r.n_gt = j.at("n_gt").get<std::size_t>();
  r.n_pred = j.at("n_pred").get<std::size_t>();
  r.tp = j.at("tp").get<std::size_t>();
  r.f1_inst = j.at("f1_inst").get<double>();
  r.recall = j.at("recall").get<double>();
  r.recall_counts.hits = j.at("recall_hits").get<std::size_t>();
  r.recall_counts.points = j.at("recall_points").get<std::size_t>();
  for (const auto& m : j.at("per_instance")) {
    r.per_instance.push_back({m.at("pred").get<std::size_t>(), m.at("gt").get<std::size_t>(),
                              m.at("distance").get<double>(), m.at("tp").get<bool>()});
  }
  return r;
}

void save_report(const std::filesystem::path& path, const EvalReport& report) {
  write_text(path, report_to_json(report).dump(2) + "\n");
}

std::string report_csv_header() { return "scene,n_gt,n_pred,tp,f1_inst,recall\n"; }

std::string report_csv_row(const std::string& scene, const EvalReport& r) {
  return scene + "," + std::to_string(r.n_gt) + "," + std::to_string(r.n_pred) + "," +
         std::to_string(r.tp) + "," + detail::format_double(r.f1_inst) + "," +
         detail::format_double(r.recall) + "\n";
}

}  // namespace symbin
