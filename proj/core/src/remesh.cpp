#include "shapecomp/remesh.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "shapecomp/adam.hpp"
#include "shapecomp/errors.hpp"
#include "shapecomp/geometry_losses.hpp"
#include "shapecomp/ops.hpp"
#include "shapecomp/spatial.hpp"

namespace shapecomp {

void RemeshConfig::validate() const {
  if (iterations <= 0) throw ConfigError("remesh iterations must be positive");
  if (!(learning_rate > 0)) throw ConfigError("remesh learning rate must be positive");
  if (w_chamfer < 0 || w_normal < 0 || w_laplacian < 0 || w_edge < 0) {
    throw ConfigError("remesh loss weights must be non-negative");
  }
  if (template_level < 0 || template_level > kMaxIcosphereLevel) {
    throw ConfigError("template level out of range");
  }
}

Mesh remesh_template(const Mesh& target, int level) {
  const Mesh sphere = icosphere(level);
  const Vec3 c = centroid(target.vertices());
  double radius = 0.0;
  for (Index i = 0; i < target.vertices().rows(); ++i) {
    radius = std::max(radius, (target.vertices().row(i).transpose() - c).norm());
  }
  if (!(radius > 0)) throw NumericError("remesh target has zero extent");
  Tensor x = (sphere.vertices() * radius).rowwise() + c.transpose();
  return sphere.with_vertices(std::move(x));
}

RemeshResult remesh(const Mesh& target, const RemeshConfig& config) {
  config.validate();
  return remesh_from(remesh_template(target, config.template_level), target, config);
}

RemeshResult remesh_from(const Mesh& start, const Mesh& target, const RemeshConfig& config) {
  config.validate();
  const Topology& topo = start.topology();
  const KdTree target_tree(target.vertices());
  const Tensor target_normals = vertex_normals(target);

  Tensor x = start.vertices();
  AdamState adam(AdamConfig{config.learning_rate}, x);

  RemeshResult result{start, {}, 0};
  double best_total = std::numeric_limits<double>::infinity();
  result.log.reserve(config.iterations + 1);

  for (int step = 0; step <= config.iterations; ++step) {
    if (!x.allFinite()) throw DivergenceError(static_cast<std::size_t>(step), "remesh vertices are not finite");
    Tape tape;
    Var xv = tape.watch(x);
    Var total;
    RemeshLogEntry entry;
    try {
      Var l_ch = ad::chamfer(xv, target_tree, config.chamfer_metric);
      Var l_n = ad::normal_loss(xv, topo, target_tree, target_normals);
      Var l_l = ad::laplacian_reg_loss(xv, topo);
      Var l_e = ad::edge_loss(xv, topo);
      total = ad::add(ad::add(ad::scale(l_ch, config.w_chamfer), ad::scale(l_n, config.w_normal)),
                      ad::add(ad::scale(l_l, config.w_laplacian), ad::scale(l_e, config.w_edge)));
      entry = {step, l_ch.scalar(), l_n.scalar(), l_l.scalar(), l_e.scalar(), total.scalar()};
    } catch (const NumericError& e) {
      throw DivergenceError(static_cast<std::size_t>(step), std::string("remesh: ") + e.what());
    }
    if (!std::isfinite(entry.total)) {
      throw DivergenceError(static_cast<std::size_t>(step), "remesh loss is not finite");
    }
    result.log.push_back(entry);
    if (entry.total < best_total) {
      best_total = entry.total;
      result.best_step = step;
      result.mesh = start.with_vertices(x);
    }
    if (step == config.iterations) break;
    try {
      tape.backward(total);
    } catch (const NumericError& e) {
      throw DivergenceError(static_cast<std::size_t>(step), std::string("remesh: ") + e.what());
    }
    adam.step(x, tape.gradient(xv));
  }
  return result;
}

}  // namespace shapecomp
