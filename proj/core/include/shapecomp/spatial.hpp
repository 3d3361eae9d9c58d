#pragma once

#include <vector>

#include "shapecomp/tensor.hpp"

namespace shapecomp {

/// Static 3D k-d tree for exact nearest-neighbor queries. Ties in distance
/// are broken toward the lowest point index, so results match a brute-force
/// scan exactly.
class KdTree {
 public:
  struct Hit {
    int index = -1;
    double sq_distance = 0.0;
  };

  explicit KdTree(const Tensor& points);

  Hit nearest(const Vec3& query) const;
  /// Nearest hit for every row of `queries`.
  std::vector<Hit> nearest(const Tensor& queries) const;

  int size() const { return static_cast<int>(points_.rows()); }
  const Tensor& points() const { return points_; }

 private:
  struct Node {
    int begin = 0;
    int end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end);
  void search(int node, const Vec3& q, Hit& best) const;

  Tensor points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// O(n*m) reference scan with the same tie-breaking rule.
KdTree::Hit brute_force_nearest(const Tensor& points, const Vec3& query);

}  // namespace shapecomp
