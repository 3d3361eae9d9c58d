#include "shapecomp/spatial.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "shapecomp/errors.hpp"

namespace shapecomp {
namespace {

constexpr int kLeafSize = 8;

inline bool better(double d, int idx, const KdTree::Hit& best) {
  return d < best.sq_distance || (d == best.sq_distance && idx < best.index);
}

}  // namespace

KdTree::KdTree(const Tensor& points) : points_(points) {
  if (points_.cols() != 3 || points_.rows() == 0) {
    throw ContractError("KdTree needs a non-empty n x 3 point set");
  }
  order_.resize(points_.rows());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.rows() / kLeafSize + 2);
  build(0, static_cast<int>(order_.size()));
}

int KdTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (int i = begin; i < end; ++i) {
    const Vec3 p = points_.row(order_[i]).transpose();
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double pa = points_(a, axis);
                     const double pb = points_(b, axis);
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_(order_[mid], axis);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void KdTree::search(int node_id, const Vec3& q, Hit& best) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const double d = (points_.row(idx).transpose() - q).squaredNorm();
      if (better(d, idx, best)) best = {idx, d};
    }
    return;
  }
  const double delta = q[node.axis] - node.split;
  const int near = delta < 0 ? node.left : node.right;
  const int far = delta < 0 ? node.right : node.left;
  search(near, q, best);
  // Equality is not pruned so that equal-distance points with lower indices
  // on the far side are still found.
  if (delta * delta <= best.sq_distance) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
  Hit best{-1, std::numeric_limits<double>::infinity()};
  search(0, query, best);
  return best;
}

std::vector<KdTree::Hit> KdTree::nearest(const Tensor& queries) const {
  std::vector<Hit> hits(queries.rows());
  for (Index i = 0; i < queries.rows(); ++i) hits[i] = nearest(Vec3(queries.row(i).transpose()));
  return hits;
}

KdTree::Hit brute_force_nearest(const Tensor& points, const Vec3& query) {
  KdTree::Hit best{-1, std::numeric_limits<double>::infinity()};
  for (Index i = 0; i < points.rows(); ++i) {
    const double d = (points.row(i).transpose() - query).squaredNorm();
    if (better(d, static_cast<int>(i), best)) best = {static_cast<int>(i), d};
  }
  return best;
}

}  // namespace shapecomp
