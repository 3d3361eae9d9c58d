#include "shapecomp/geometry_losses.hpp"

#include <cmath>
#include <vector>

#include "shapecomp/errors.hpp"
#include "shapecomp/ops.hpp"

namespace shapecomp {
namespace ad {
namespace {

struct ChamferTerms {
  double value = 0.0;
  std::vector<KdTree::Hit> a_to_b;
  std::vector<KdTree::Hit> b_to_a;
};

double pair_cost(double sq_distance, ChamferMetric metric) {
  return metric == ChamferMetric::kSquared ? sq_distance : std::sqrt(sq_distance);
}

/// d cost / d a for the pair (a, b) given diff = a - b.
Eigen::RowVector3d pair_gradient(const Eigen::RowVector3d& diff, ChamferMetric metric) {
  if (metric == ChamferMetric::kSquared) return 2.0 * diff;
  const double len = diff.norm();
  if (len == 0.0) return Eigen::RowVector3d::Zero();
  return diff / len;
}

ChamferTerms chamfer_terms(const Tensor& a, const Tensor& b, const KdTree& tree_b,
                           const KdTree& tree_a, ChamferMetric metric) {
  ChamferTerms c;
  c.a_to_b = tree_b.nearest(a);
  c.b_to_a = tree_a.nearest(b);
  double sa = 0.0;
  for (const auto& h : c.a_to_b) sa += pair_cost(h.sq_distance, metric);
  double sb = 0.0;
  for (const auto& h : c.b_to_a) sb += pair_cost(h.sq_distance, metric);
  c.value = sa / static_cast<double>(a.rows()) + sb / static_cast<double>(b.rows());
  return c;
}

Var record_chamfer(Tape& t, Var a, Var b, ChamferTerms terms, ChamferMetric metric) {
  Tensor out(1, 1);
  out(0, 0) = terms.value;
  const bool needs = t.requires_grad(a) || (b.valid() && t.requires_grad(b));
  return t.record(
      "chamfer", std::move(out), needs,
      [a, b, metric, terms = std::move(terms)](const Tensor& g, Tape& tp) {
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        const double ga = g(0, 0) / static_cast<double>(av.rows());
        const double gb = g(0, 0) / static_cast<double>(bv.rows());
        Tensor da = Tensor::Zero(av.rows(), 3);
        Tensor db = Tensor::Zero(bv.rows(), 3);
        for (Index i = 0; i < av.rows(); ++i) {
          const int j = terms.a_to_b[i].index;
          const Eigen::RowVector3d d = pair_gradient(av.row(i) - bv.row(j), metric);
          da.row(i) += ga * d;
          db.row(j) -= ga * d;
        }
        for (Index j = 0; j < bv.rows(); ++j) {
          const int i = terms.b_to_a[j].index;
          const Eigen::RowVector3d d = pair_gradient(bv.row(j) - av.row(i), metric);
          db.row(j) += gb * d;
          da.row(i) -= gb * d;
        }
        tp.accumulate(a, da);
        tp.accumulate(b, db);
      });
}

}  // namespace

Var chamfer(Var a, Var b, ChamferMetric metric) {
  if (a.tape() != b.tape()) throw ContractError("chamfer: operands on different tapes");
  check_points(a.value(), "chamfer operand A");
  check_points(b.value(), "chamfer operand B");
  const KdTree tree_a(a.value());
  const KdTree tree_b(b.value());
  return record_chamfer(*a.tape(), a, b, chamfer_terms(a.value(), b.value(), tree_b, tree_a, metric),
                        metric);
}

Var chamfer(Var a, const KdTree& fixed, ChamferMetric metric) {
  check_points(a.value(), "chamfer operand A");
  Tape& t = *a.tape();
  Var b = t.constant(fixed.points());
  const KdTree tree_a(a.value());
  return record_chamfer(t, a, b, chamfer_terms(a.value(), fixed.points(), fixed, tree_a, metric),
                        metric);
}

Var normal_loss(Var pred, const Topology& topology, const KdTree& target,
                const Tensor& target_normals) {
  Tape& t = *pred.tape();
  const auto hits = target.nearest(pred.value());
  std::vector<int> from;
  std::vector<int> to;
  Tensor normals(static_cast<Index>(topology.neighbor_indices().size()), 3);
  Index row = 0;
  for (int i = 0; i < topology.vertex_count(); ++i) {
    for (int j : topology.neighbors(i)) {
      from.push_back(i);
      to.push_back(j);
      normals.row(row++) = target_normals.row(hits[i].index);
    }
  }
  if (from.empty()) throw ContractError("normal_loss: mesh has no edges");
  Var edge_vec = sub(gather_rows(pred, from), gather_rows(pred, to));
  Var dots = row_sum(mul(edge_vec, t.constant(std::move(normals))));
  return scale(sum(square(dots)), 1.0 / static_cast<double>(from.size()));
}

Var laplacian_reg_loss(Var pred, const Topology& topology) {
  Var umbrella = sub(pred, neighbor_mean(pred, topology));
  return scale(sum(square(umbrella)), 1.0 / static_cast<double>(topology.vertex_count()));
}

Var edge_loss(Var pred, const Topology& topology) {
  const auto& edges = topology.edges();
  if (edges.empty()) throw ContractError("edge_loss: mesh has no edges");
  std::vector<int> lo;
  std::vector<int> hi;
  lo.reserve(edges.size());
  hi.reserve(edges.size());
  for (const Edge& e : edges) {
    lo.push_back(e[0]);
    hi.push_back(e[1]);
  }
  Var d = sub(gather_rows(pred, lo), gather_rows(pred, hi));
  return scale(sum(square(d)), 1.0 / static_cast<double>(edges.size()));
}

}  // namespace ad

double chamfer_loss(const Tensor& a, const Tensor& b, ChamferMetric metric) {
  Tape t;
  return ad::chamfer(t.constant(a), t.constant(b), metric).scalar();
}

double normal_loss(const Mesh& pred, const Tensor& target_vertices, const Tensor& target_normals) {
  Tape t;
  const KdTree tree(target_vertices);
  return ad::normal_loss(t.constant(pred.vertices()), pred.topology(), tree, target_normals).scalar();
}

double laplacian_reg_loss(const Mesh& pred) {
  Tape t;
  return ad::laplacian_reg_loss(t.constant(pred.vertices()), pred.topology()).scalar();
}

double edge_loss(const Mesh& pred) {
  Tape t;
  return ad::edge_loss(t.constant(pred.vertices()), pred.topology()).scalar();
}

}  // namespace shapecomp
