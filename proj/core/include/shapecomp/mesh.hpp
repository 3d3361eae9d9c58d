#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shapecomp/tensor.hpp"

namespace shapecomp {

using Face = std::array<int, 3>;
using Edge = std::array<int, 2>;

/// Connectivity shared by every mesh of a population. Immutable once built.
class Topology {
 public:
  /// Validates faces against `vertex_count` and derives edges and 1-ring
  /// neighbor lists (sorted ascending). Throws StructureError on an
  /// out-of-range index or a degenerate face.
  static std::shared_ptr<const Topology> build(std::vector<Face> faces, int vertex_count);

  int vertex_count() const { return vertex_count_; }
  const std::vector<Face>& faces() const { return faces_; }
  /// Unordered edges, each once, as (lo, hi) sorted lexicographically.
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const int> neighbors(int vertex) const {
    return {neighbor_index_.data() + neighbor_offset_[vertex],
            neighbor_index_.data() + neighbor_offset_[vertex + 1]};
  }
  int degree(int vertex) const { return neighbor_offset_[vertex + 1] - neighbor_offset_[vertex]; }

  /// CSR view of the neighbor lists.
  const std::vector<int>& neighbor_offsets() const { return neighbor_offset_; }
  const std::vector<int>& neighbor_indices() const { return neighbor_index_; }

  /// 16 hex digits of a 64-bit FNV-1a hash over the face list.
  const std::string& fingerprint() const { return fingerprint_; }

  bool is_connected() const;
  /// V - E + F.
  int euler_characteristic() const;

 private:
  Topology() = default;

  int vertex_count_ = 0;
  std::vector<Face> faces_;
  std::vector<Edge> edges_;
  std::vector<int> neighbor_offset_;
  std::vector<int> neighbor_index_;
  std::string fingerprint_;
};

using TopologyPtr = std::shared_ptr<const Topology>;

inline TopologyPtr build_topology(std::vector<Face> faces, int vertex_count) {
  return Topology::build(std::move(faces), vertex_count);
}

/// Vertex coordinates (N x 3) over a shared topology.
class Mesh {
 public:
  Mesh(Tensor vertices, TopologyPtr topology);

  const Tensor& vertices() const { return vertices_; }
  const Topology& topology() const { return *topology_; }
  const TopologyPtr& topology_ptr() const { return topology_; }
  const std::string& fingerprint() const { return topology_->fingerprint(); }
  int vertex_count() const { return static_cast<int>(vertices_.rows()); }
  Vec3 vertex(int i) const { return vertices_.row(i).transpose(); }

  /// Same topology, new coordinates.
  Mesh with_vertices(Tensor vertices) const { return Mesh(std::move(vertices), topology_); }

 private:
  Tensor vertices_;
  TopologyPtr topology_;
};

/// Unstructured P x 3 point set. Non-empty, finite.
class PointCloud {
 public:
  explicit PointCloud(Tensor points);

  const Tensor& points() const { return points_; }
  int size() const { return static_cast<int>(points_.rows()); }

 private:
  Tensor points_;
};

inline constexpr int kMaxIcosphereLevel = 6;

/// Unit-radius icosphere by recursive 4-way subdivision of the icosahedron
/// with re-projection onto the sphere. Level k has 10*4^k + 2 vertices.
Mesh icosphere(int subdivision_level);

/// Area-weighted vertex normals, unit length, oriented by face winding.
/// Throws NumericError naming the first vertex whose accumulated normal
/// vanishes.
Tensor vertex_normals(const Mesh& mesh);

/// Throws ContractError unless `points` is n x 3 (n > 0) and finite.
void check_points(const Tensor& points, const char* what);

/// Returns (points - centroid, centroid).
std::pair<Tensor, Vec3> centroid_center(const Tensor& points);
std::pair<Mesh, Vec3> centroid_center(const Mesh& mesh);
std::pair<PointCloud, Vec3> centroid_center(const PointCloud& cloud);

Vec3 centroid(const Tensor& points);

/// Maximum |x - y| over corresponding rows.
double max_row_distance(const Tensor& a, const Tensor& b);

/// Throws TopologyError when the fingerprints differ.
void require_same_topology(const std::string& expected, const std::string& actual,
                           const char* what);

}  // namespace shapecomp
