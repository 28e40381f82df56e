#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "symbin/types.hpp"

namespace symbin {

struct PlyCloud {
  PointCloud points;
  std::optional<std::vector<int>> instance_ids;
};

/// ASCII PLY reader. The vertex element must carry x, y, z (any scalar type);
/// an integer `instance_id` property is picked up when present. Other elements
/// are skipped. Errors are ParseError with the offending line number.
PlyCloud parse_ply(std::istream& in);
PlyCloud load_ply(const std::filesystem::path& path);

/// Writes x, y, z as double with shortest round-trip formatting, so a
/// load/save cycle reproduces the file byte for byte.
void write_ply(std::ostream& out, const PointCloud& points, const std::vector<int>* instance_ids = nullptr);
void save_ply(const std::filesystem::path& path, const PointCloud& points,
              const std::vector<int>* instance_ids = nullptr);

}  // namespace symbin
