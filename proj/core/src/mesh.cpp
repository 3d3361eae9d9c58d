#include "shapecomp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>

#include "shapecomp/errors.hpp"

namespace shapecomp {
namespace {

std::string fnv1a_fingerprint(const std::vector<Face>& faces) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_byte = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (const Face& f : faces) {
    for (int v : f) {
      const auto u = static_cast<std::uint32_t>(v);
      for (int k = 0; k < 4; ++k) mix_byte(static_cast<std::uint8_t>(u >> (8 * k)));
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::shared_ptr<const Topology> Topology::build(std::vector<Face> faces, int vertex_count) {
  if (vertex_count < 0) throw StructureError("negative vertex count");
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& face = faces[f];
    for (int v : face) {
      if (v < 0 || v >= vertex_count) {
        throw StructureError("face " + std::to_string(f) + " references vertex " +
                             std::to_string(v) + " outside [0, " +
                             std::to_string(vertex_count) + ")");
      }
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      throw StructureError("face " + std::to_string(f) + " is degenerate (repeated vertex)");
    }
  }

  auto topo = std::shared_ptr<Topology>(new Topology());
  topo->vertex_count_ = vertex_count;

  std::vector<Edge> edges;
  edges.reserve(faces.size() * 3);
  for (const Face& face : faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = face[k];
      const int b = face[(k + 1) % 3];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::vector<int> degree(vertex_count, 0);
  for (const Edge& e : edges) {
    ++degree[e[0]];
    ++degree[e[1]];
  }
  topo->neighbor_offset_.assign(vertex_count + 1, 0);
  for (int i = 0; i < vertex_count; ++i) {
    topo->neighbor_offset_[i + 1] = topo->neighbor_offset_[i] + degree[i];
  }
  topo->neighbor_index_.assign(topo->neighbor_offset_.back(), 0);
  std::vector<int> fill(topo->neighbor_offset_.begin(), topo->neighbor_offset_.end() - 1);
  for (const Edge& e : edges) {
    topo->neighbor_index_[fill[e[0]]++] = e[1];
    topo->neighbor_index_[fill[e[1]]++] = e[0];
  }
  for (int i = 0; i < vertex_count; ++i) {
    std::sort(topo->neighbor_index_.begin() + topo->neighbor_offset_[i],
              topo->neighbor_index_.begin() + topo->neighbor_offset_[i + 1]);
  }

  topo->fingerprint_ = fnv1a_fingerprint(faces);
  topo->edges_ = std::move(edges);
  topo->faces_ = std::move(faces);
  return topo;
}

bool Topology::is_connected() const {
  if (vertex_count_ == 0) return false;
  std::vector<char> seen(vertex_count_, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int visited = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int n : neighbors(v)) {
      if (!seen[n]) {
        seen[n] = 1;
        ++visited;
        stack.push_back(n);
      }
    }
  }
  return visited == vertex_count_;
}

int Topology::euler_characteristic() const {
  return vertex_count_ - static_cast<int>(edges_.size()) + static_cast<int>(faces_.size());
}

void check_points(const Tensor& points, const char* what) {
  if (points.cols() != 3) {
    throw ContractError(std::string(what) + ": expected 3 columns, got " +
                        std::to_string(points.cols()));
  }
  if (points.rows() == 0) throw ContractError(std::string(what) + ": empty point set");
  if (!points.allFinite()) throw ContractError(std::string(what) + ": non-finite coordinate");
}

Mesh::Mesh(Tensor vertices, TopologyPtr topology)
    : vertices_(std::move(vertices)), topology_(std::move(topology)) {
  if (!topology_) throw ContractError("mesh without topology");
  if (vertices_.rows() != topology_->vertex_count()) {
    throw ContractError("mesh has " + std::to_string(vertices_.rows()) +
                        " vertex rows but topology expects " +
                        std::to_string(topology_->vertex_count()));
  }
  check_points(vertices_, "mesh vertices");
}

PointCloud::PointCloud(Tensor points) : points_(std::move(points)) {
  check_points(points_, "point cloud");
}

Mesh icosphere(int subdivision_level) {
  if (subdivision_level < 0) throw ContractError("negative icosphere level");
  if (subdivision_level > kMaxIcosphereLevel) {
    throw BoundError("icosphere level " + std::to_string(subdivision_level) +
                     " exceeds cap " + std::to_string(kMaxIcosphereLevel));
  }
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
  };
  for (Vec3& v : verts) v.normalize();
  std::vector<Face> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1},
  };

  for (int level = 0; level < subdivision_level; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int id = static_cast<int>(verts.size());
      verts.push_back((verts[a] + verts[b]).normalized());
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const Face& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  Tensor x(static_cast<Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) x.row(static_cast<Index>(i)) = verts[i].transpose();
  const int n = static_cast<int>(verts.size());
  return Mesh(std::move(x), Topology::build(std::move(faces), n));
}

Tensor vertex_normals(const Mesh& mesh) {
  const Tensor& x = mesh.vertices();
  Tensor normals = Tensor::Zero(x.rows(), 3);
  for (const Face& f : mesh.topology().faces()) {
    const Vec3 a = x.row(f[0]).transpose();
    const Vec3 b = x.row(f[1]).transpose();
    const Vec3 c = x.row(f[2]).transpose();
    // |cross| = 2 * area, so summing raw cross products is area weighting.
    const Vec3 n = (b - a).cross(c - a);
    for (int v : f) normals.row(v) += n.transpose();
  }
  for (Index i = 0; i < normals.rows(); ++i) {
    const double len = normals.row(i).norm();
    if (!(len > 0.0) || !std::isfinite(len)) {
      throw NumericError("vertex " + std::to_string(i) + " has a zero-magnitude accumulated normal");
    }
    normals.row(i) /= len;
  }
  return normals;
}

Vec3 centroid(const Tensor& points) {
  if (points.rows() == 0) throw ContractError("centroid of empty point set");
  Vec3 sum = Vec3::Zero();
  for (Index i = 0; i < points.rows(); ++i) sum += points.row(i).transpose();
  return sum / static_cast<double>(points.rows());
}

std::pair<Tensor, Vec3> centroid_center(const Tensor& points) {
  const Vec3 c = centroid(points);
  Tensor out = points.rowwise() - c.transpose();
  return {std::move(out), c};
}

std::pair<Mesh, Vec3> centroid_center(const Mesh& mesh) {
  auto [x, c] = centroid_center(mesh.vertices());
  return {mesh.with_vertices(std::move(x)), c};
}

std::pair<PointCloud, Vec3> centroid_center(const PointCloud& cloud) {
  auto [x, c] = centroid_center(cloud.points());
  return {PointCloud(std::move(x)), c};
}

double max_row_distance(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError("max_row_distance: shape mismatch");
  }
  double best = 0.0;
  for (Index i = 0; i < a.rows(); ++i) best = std::max(best, (a.row(i) - b.row(i)).norm());
  return best;
}

void require_same_topology(const std::string& expected, const std::string& actual,
                           const char* what) {
  if (expected != actual) {
    throw TopologyError(std::string(what) + ": topology fingerprint " + actual +
                        " does not match expected " + expected);
  }
}

}  // namespace shapecomp
