#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "shapecomp/mesh.hpp"

namespace shapecomp {

/// Parses ASCII OFF: "OFF", then "V F E", V vertex lines, F lines "3 i j k".
/// '#' starts a comment. Throws ParseError with the offending line number.
Mesh parse_off(std::string_view text);
std::string format_off(const Mesh& mesh);

Mesh load_mesh(const std::filesystem::path& path);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

/// One "x y z" per line.
PointCloud parse_xyz(std::string_view text);
std::string format_xyz(const Tensor& points);

PointCloud load_pointcloud(const std::filesystem::path& path);
void save_pointcloud(const PointCloud& cloud, const std::filesystem::path& path);

/// Shortest decimal form that round-trips the double exactly.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);
/// Writes to a sibling temp file, then renames over `path`.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace shapecomp
