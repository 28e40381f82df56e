#include "symbin/ply.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "format_util.hpp"

namespace symbin {

namespace {

struct Element {
  std::string name;
  long count = 0;
  std::vector<std::string> properties;
  bool has_list = false;
};

bool is_integer_type(const std::string& t) {
  return t == "char" || t == "uchar" || t == "short" || t == "ushort" || t == "int" ||
         t == "uint" || t == "int8" || t == "uint8" || t == "int16" || t == "uint16" ||
         t == "int32" || t == "uint32";
}

bool is_scalar_type(const std::string& t) {
  return is_integer_type(t) || t == "float" || t == "double" || t == "float32" ||
         t == "float64";
}

std::vector<std::string> split(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

double parse_number(const std::string& tok, long line) {
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("invalid number '" + tok + "'", line);
  return v;
}

}  // namespace

PlyCloud parse_ply(std::istream& in) {
  std::string line;
  long line_no = 0;
  const auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw ParseError("missing 'ply' magic", 1);
  std::vector<Element> elements;
  bool format_seen = false;
  for (;;) {
    if (!next_line()) throw ParseError("header ends before 'end_header'", line_no);
    const auto tok = split(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() != 3) throw ParseError("malformed format line", line_no);
      if (tok[1] != "ascii") throw ParseError("unsupported PLY format '" + tok[1] + "'", line_no);
      format_seen = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError("malformed element line", line_no);
      Element e;
      e.name = tok[1];
      try {
        e.count = std::stol(tok[2]);
      } catch (const std::exception&) {
        throw ParseError("invalid element count '" + tok[2] + "'", line_no);
      }
      if (e.count < 0) throw ParseError("negative element count", line_no);
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty()) throw ParseError("property before any element", line_no);
      auto& e = elements.back();
      if (tok.size() == 5 && tok[1] == "list") {
        e.has_list = true;
        e.properties.push_back(tok[4]);
      } else if (tok.size() == 3 && is_scalar_type(tok[1])) {
        e.properties.push_back(tok[2]);
      } else {
        throw ParseError("malformed property line", line_no);
      }
    } else {
      throw ParseError("unknown header keyword '" + tok[0] + "'", line_no);
    }
  }
  if (!format_seen) throw ParseError("header has no format line", line_no);

  PlyCloud out;
  bool vertex_seen = false;
  for (const auto& e : elements) {
    if (e.name != "vertex") {
      for (long k = 0; k < e.count; ++k) {
        if (!next_line()) {
          throw ParseError("missing " + e.name + " element " + std::to_string(k + 1) + " of " +
                               std::to_string(e.count),
                           line_no + 1);
        }
      }
      continue;
    }
    vertex_seen = true;
    if (e.has_list) throw ParseError("list properties on vertex are not supported", 0);
    int ix = -1, iy = -1, iz = -1, iid = -1;
    for (std::size_t p = 0; p < e.properties.size(); ++p) {
      const auto& n = e.properties[p];
      const int pi = static_cast<int>(p);
      if (n == "x") ix = pi;
      if (n == "y") iy = pi;
      if (n == "z") iz = pi;
      if (n == "instance_id") iid = pi;
    }
    if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x, y or z", 0);
    if (iid >= 0) out.instance_ids.emplace();
    out.points.reserve(static_cast<std::size_t>(e.count));
    for (long k = 0; k < e.count; ++k) {
      if (!next_line()) {
        throw ParseError("missing vertex element " + std::to_string(k + 1) + " of " +
                             std::to_string(e.count),
                         line_no + 1);
      }
      const auto tok = split(line);
      if (tok.size() != e.properties.size()) {
        throw ParseError("vertex element " + std::to_string(k + 1) + " has " +
                             std::to_string(tok.size()) + " values, expected " +
                             std::to_string(e.properties.size()),
                         line_no);
      }
      out.points.emplace_back(parse_number(tok[static_cast<std::size_t>(ix)], line_no),
                              parse_number(tok[static_cast<std::size_t>(iy)], line_no),
                              parse_number(tok[static_cast<std::size_t>(iz)], line_no));
      if (iid >= 0) {
        const double id = parse_number(tok[static_cast<std::size_t>(iid)], line_no);
        if (id != static_cast<double>(static_cast<int>(id))) {
          throw ParseError("instance_id is not an integer", line_no);
        }
        out.instance_ids->push_back(static_cast<int>(id));
      }
    }
  }
  if (!vertex_seen) throw ParseError("no vertex element", line_no);
  return out;
}

PlyCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  try {
    return parse_ply(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

void write_ply(std::ostream& out, const PointCloud& points, const std::vector<int>* ids) {
  if (ids && ids->size() != points.size()) {
    throw InvalidArgument("instance id count does not match point count");
  }
  out << "ply\nformat ascii 1.0\ncomment units mm\nelement vertex " << points.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n";
  if (ids) out << "property int instance_id\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << detail::format_double(points[i].x()) << ' ' << detail::format_double(points[i].y())
        << ' ' << detail::format_double(points[i].z());
    if (ids) out << ' ' << (*ids)[i];
    out << '\n';
  }
}

void save_ply(const std::filesystem::path& path, const PointCloud& points,
              const std::vector<int>* ids) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  write_ply(out, points, ids);
}

}  // namespace symbin
