#include "shapecomp/mesh_io.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

#include "shapecomp/errors.hpp"

namespace shapecomp {
namespace {

struct Line {
  std::size_t number;
  std::vector<std::string_view> tokens;
};

/// Splits into non-empty, comment-stripped, tokenized lines.
std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view line = text.substr(pos, end - pos);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    Line tokens{number, {}};
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) tokens.tokens.push_back(line.substr(i, j - i));
      i = j;
    }
    if (!tokens.tokens.empty()) lines.push_back(std::move(tokens));
    if (end == text.size()) break;
    pos = end + 1;
  }
  return lines;
}

double to_double(std::string_view token, std::size_t line) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(line, "non-numeric token '" + std::string(token) + "'");
  }
  return value;
}

long to_int(std::string_view token, std::size_t line) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(line, "expected integer, got '" + std::string(token) + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw ContractError("format_double failed");
  return std::string(buf, ptr);
}

Mesh parse_off(std::string_view text) {
  const auto lines = tokenize(text);
  if (lines.empty()) throw ParseError(1, "empty OFF file");
  std::size_t cursor = 0;
  const Line& header = lines[cursor++];
  if (header.tokens.size() != 1 || header.tokens[0] != "OFF") {
    throw ParseError(header.number, "expected 'OFF' header");
  }
  if (cursor >= lines.size()) throw ParseError(header.number, "missing count line");
  const Line& counts = lines[cursor++];
  if (counts.tokens.size() != 3) throw ParseError(counts.number, "expected 'V F E'");
  const long nv = to_int(counts.tokens[0], counts.number);
  const long nf = to_int(counts.tokens[1], counts.number);
  to_int(counts.tokens[2], counts.number);
  if (nv < 0 || nf < 0) throw ParseError(counts.number, "negative element count");

  Tensor x(nv, 3);
  for (long i = 0; i < nv; ++i) {
    if (cursor >= lines.size()) throw ParseError(lines.back().number, "truncated vertex list");
    const Line& line = lines[cursor++];
    if (line.tokens.size() != 3) throw ParseError(line.number, "vertex line needs 3 coordinates");
    for (int k = 0; k < 3; ++k) x(i, k) = to_double(line.tokens[k], line.number);
  }
  std::vector<Face> faces;
  faces.reserve(nf);
  for (long f = 0; f < nf; ++f) {
    if (cursor >= lines.size()) throw ParseError(lines.back().number, "truncated face list");
    const Line& line = lines[cursor++];
    const long arity = to_int(line.tokens[0], line.number);
    if (arity != 3) {
      throw ParseError(line.number, "only triangular faces are supported (got " +
                                        std::to_string(arity) + " vertices)");
    }
    if (line.tokens.size() != 4) throw ParseError(line.number, "face line must be '3 i j k'");
    Face face{};
    for (int k = 0; k < 3; ++k) {
      const long idx = to_int(line.tokens[k + 1], line.number);
      if (idx < 0 || idx >= nv) {
        throw ParseError(line.number, "face index " + std::to_string(idx) + " out of range");
      }
      face[k] = static_cast<int>(idx);
    }
    faces.push_back(face);
  }
  if (cursor != lines.size()) throw ParseError(lines[cursor].number, "trailing content");
  try {
    return Mesh(std::move(x), Topology::build(std::move(faces), static_cast<int>(nv)));
  } catch (const StructureError& e) {
    throw ParseError(counts.number, e.what());
  } catch (const ContractError& e) {
    throw ParseError(counts.number, e.what());
  }
}

std::string format_off(const Mesh& mesh) {
  std::string out = "OFF\n";
  const auto& faces = mesh.topology().faces();
  out += std::to_string(mesh.vertex_count()) + " " + std::to_string(faces.size()) + " 0\n";
  const Tensor& x = mesh.vertices();
  for (Index i = 0; i < x.rows(); ++i) {
    out += format_double(x(i, 0)) + " " + format_double(x(i, 1)) + " " + format_double(x(i, 2)) + "\n";
  }
  for (const Face& f : faces) {
    out += "3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " + std::to_string(f[2]) + "\n";
  }
  return out;
}

PointCloud parse_xyz(std::string_view text) {
  const auto lines = tokenize(text);
  if (lines.empty()) throw ParseError(1, "point cloud file contains no points");
  Tensor p(static_cast<Index>(lines.size()), 3);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const Line& line = lines[i];
    if (line.tokens.size() != 3) throw ParseError(line.number, "expected 'x y z'");
    for (int k = 0; k < 3; ++k) p(static_cast<Index>(i), k) = to_double(line.tokens[k], line.number);
  }
  return PointCloud(std::move(p));
}

std::string format_xyz(const Tensor& points) {
  std::string out;
  for (Index i = 0; i < points.rows(); ++i) {
    out += format_double(points(i, 0)) + " " + format_double(points(i, 1)) + " " +
           format_double(points(i, 2)) + "\n";
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

Mesh load_mesh(const std::filesystem::path& path) { return parse_off(read_text_file(path)); }

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  write_text_atomic(path, format_off(mesh));
}

PointCloud load_pointcloud(const std::filesystem::path& path) {
  return parse_xyz(read_text_file(path));
}

void save_pointcloud(const PointCloud& cloud, const std::filesystem::path& path) {
  write_text_atomic(path, format_xyz(cloud.points()));
}

}  // namespace shapecomp
