#include "shapecomp/gradient_suite.hpp"

#include <functional>
#include <map>

#include "shapecomp/completion.hpp"
#include "shapecomp/errors.hpp"
#include "shapecomp/gcvae.hpp"
#include "shapecomp/geometry_losses.hpp"
#include "shapecomp/gradcheck.hpp"
#include "shapecomp/rng.hpp"

namespace shapecomp {
namespace {

constexpr double kTolerance = 1e-5;
constexpr double kCompletionTolerance = 1e-4;

Tensor random_tensor(Index rows, Index cols, CounterRng& rng, double scale = 1.0) {
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = scale * rng.uniform(-1.0, 1.0);
  return t;
}

/// sum(x .* weights) with fixed random weights, so every output entry
/// contributes with a distinct factor.
Var weighted_sum(Tape& t, Var x, std::uint64_t seed) {
  CounterRng rng(seed);
  return ad::sum(ad::mul(x, t.constant(random_tensor(x.rows(), x.cols(), rng))));
}

Mesh bumpy_sphere(int level, std::uint64_t seed, double amplitude) {
  Mesh s = icosphere(level);
  CounterRng rng(seed);
  Tensor v = s.vertices();
  for (Index i = 0; i < v.rows(); ++i) v.row(i) *= 1.0 + amplitude * rng.uniform(-1.0, 1.0);
  return s.with_vertices(v);
}

double check_feast() {
  const Mesh m = icosphere(0);
  const FeastGraph graph = FeastGraph::from_topology(m.topology());
  CounterRng rng(11);
  const int in = 4, out = 3, heads = 3;
  std::vector<Tensor> inputs = {random_tensor(2 * 12, in, rng), random_tensor(in, heads * out, rng),
                                random_tensor(1, out, rng), random_tensor(in, heads, rng),
                                random_tensor(1, heads, rng)};
  Program p = [&graph](Tape& t, std::span<const Var> v) {
    return weighted_sum(t, ad::feast_conv(v[0], graph, v[1], v[2], v[3], v[4]), 1);
  };
  return finite_diff_check(p, inputs).max_relative_error;
}

double check_recon() {
  const Mesh m = bumpy_sphere(1, 3, 0.1);
  const Eigen::VectorXd gamma = density_weights(m);
  CounterRng rng(12);
  const Tensor target = m.vertices();
  Tensor gen = target + random_tensor(target.rows(), 3, rng, 0.1);
  return finite_diff_check(
             [&](Tape& t, Var x) { return ad::recon_loss(x, t.constant(target), t.constant(gamma)); }, gen)
      .max_relative_error;
}

double check_kl() {
  CounterRng rng(13);
  std::vector<Tensor> inputs = {random_tensor(3, 4, rng), random_tensor(3, 4, rng)};
  Program p = [](Tape&, std::span<const Var> v) { return ad::kl_loss(v[0], v[1]); };
  return finite_diff_check(p, inputs).max_relative_error;
}

double check_chamfer(ChamferMetric metric) {
  CounterRng rng(14);
  std::vector<Tensor> inputs = {random_tensor(15, 3, rng), random_tensor(11, 3, rng)};
  Program p = [metric](Tape&, std::span<const Var> v) { return ad::chamfer(v[0], v[1], metric); };
  return finite_diff_check(p, inputs).max_relative_error;
}

double check_normal() {
  const Mesh target = bumpy_sphere(2, 5, 0.05);
  const Tensor normals = vertex_normals(target);
  const KdTree tree(target.vertices());
  const Mesh pred = bumpy_sphere(1, 6, 0.1);
  const Topology& topo = pred.topology();
  return finite_diff_check([&](Tape&, Var x) { return ad::normal_loss(x, topo, tree, normals); }, pred.vertices())
      .max_relative_error;
}

double check_laplacian() {
  const Mesh pred = bumpy_sphere(1, 7, 0.1);
  const Topology& topo = pred.topology();
  return finite_diff_check([&](Tape&, Var x) { return ad::laplacian_reg_loss(x, topo); }, pred.vertices())
      .max_relative_error;
}

double check_edge() {
  const Mesh pred = bumpy_sphere(1, 8, 0.1);
  const Topology& topo = pred.topology();
  return finite_diff_check([&](Tape&, Var x) { return ad::edge_loss(x, topo); }, pred.vertices())
      .max_relative_error;
}

double check_rodrigues() {
  double worst = 0.0;
  CounterRng rng(15);
  for (double scale : {2.0, 1e-8}) {
    const Tensor r = random_tensor(1, 3, rng, scale);
    worst = std::max(worst, finite_diff_check([](Tape& t, Var x) { return weighted_sum(t, ad::rodrigues(x), 2); }, r)
                                .max_relative_error);
  }
  return worst;
}

double check_batch_norm() {
  CounterRng rng(16);
  std::vector<Tensor> inputs = {random_tensor(9, 4, rng), random_tensor(1, 4, rng), random_tensor(1, 4, rng)};
  const Tensor rm = Tensor::Zero(1, 4);
  const Tensor rv = Tensor::Ones(1, 4);
  double worst = 0.0;
  for (bool training : {true, false}) {
    Program p = [&, training](Tape& t, std::span<const Var> v) {
      return weighted_sum(t, ad::batch_norm(v[0], v[1], v[2], rm, rv, training, kNormEpsilon, nullptr), 3);
    };
    worst = std::max(worst, finite_diff_check(p, inputs).max_relative_error);
  }
  return worst;
}

double check_primitives() {
  CounterRng rng(17);
  std::vector<Tensor> inputs = {random_tensor(4, 3, rng), random_tensor(3, 5, rng), random_tensor(1, 5, rng),
                                random_tensor(4, 1, rng)};
  Program p = [](Tape& t, std::span<const Var> v) {
    Var h = ad::add_row(ad::matmul(v[0], v[1]), v[2]);
    h = ad::leaky_relu(h, 0.02);
    h = ad::softmax_rows(h);
    h = ad::mul_col(h, ad::exp(v[3]));
    const int rows[] = {3, 0, 0, 2};
    Var g = ad::gather_rows(ad::transpose(ad::transpose(h)), rows);
    g = ad::reshape(ad::slice_cols(g, 1, 4), 2, 8);
    Var s = ad::add(ad::mean(ad::square(g)), ad::sum(ad::log(ad::add(ad::square(ad::row_sum(g)),
                                                                       t.constant(Tensor::Ones(2, 1))))));
    return ad::add(s, ad::max_element(ad::scale(ad::sub(h, h), 1.0)));
  };
  return finite_diff_check(p, inputs).max_relative_error;
}

Architecture tiny_architecture(int vertex_count, bool batch_norm) {
  Architecture a;
  a.vertex_count = vertex_count;
  a.latent_size = 2;
  a.heads = 2;
  a.encoder_channels = {4, 5};
  a.generator_channels = {5, 4};
  a.batch_norm = batch_norm;
  return a;
}

double check_vae_total() {
  const Mesh m = bumpy_sphere(0, 9, 0.1);
  const FeastGraph graph = FeastGraph::from_topology(m.topology());
  ModelParams params = init_model(tiny_architecture(12, false), m.topology(), 21);
  std::vector<Tensor> inputs;
  for (auto& [name, t] : params.parameters()) inputs.push_back(*t);
  const Eigen::VectorXd gamma = density_weights(m);
  CounterRng rng(18);
  const Tensor eps = random_tensor(1, 2, rng);
  Program p = [&](Tape& t, std::span<const Var> v) {
    WeightVars w = bind_weights(t, params, false);
    std::size_t k = 0;
    WeightVars::visit(w, [&](const std::string&, Var& slot) { slot = v[k++]; });
    const Var x = t.constant(m.vertices());
    const EncoderOutputs e = encode_on_tape(params, w, graph, x, 1, true);
    const Var z = ad::add(e.mean, ad::mul(ad::exp(ad::scale(e.log_variance, 0.5)), t.constant(eps)));
    const Var xr = generate_on_tape(params, w, graph, z, true);
    const Var recon = ad::recon_loss(xr, x, t.constant(gamma));
    return ad::add(recon, ad::scale(ad::kl_loss(e.mean, e.log_variance), 0.1));
  };
  return finite_diff_check(p, inputs).max_relative_error;
}

double check_completion() {
  const Mesh m = bumpy_sphere(1, 10, 0.05);
  ModelParams params = init_model(tiny_architecture(static_cast<int>(m.vertex_count()), true), m.topology(), 22);
  for (auto& [name, t] : params.buffers()) {
    if (name.find("running_var") != std::string::npos) t->setConstant(0.5);
  }
  const ShapeModel model(std::move(params), m.topology_ptr());
  const std::vector<int> selection = {0, 3, 5, 8, 13, 21, 34};
  CounterRng rng(19);
  const Eigen::VectorXd z0 = random_tensor(2, 1, rng);
  const Tensor cloud = random_tensor(9, 3, rng, 0.3);
  const CompletionProblem problem(model, selection, cloud, z0, ChamferMetric::kEuclidean);
  std::vector<Tensor> inputs = {Tensor(z0.transpose()), random_tensor(1, 3, rng, 0.2), random_tensor(1, 3, rng, 0.05)};
  Program p = [&](Tape& t, std::span<const Var> v) {
    const WeightVars w = bind_weights(t, model.params(), false, BindScope::kGenerator);
    return problem.objective(t, w, v[0], v[1], v[2]);
  };
  return finite_diff_check(p, inputs).max_relative_error;
}

struct Entry {
  double tolerance;
  std::function<double()> run;
};

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> r = {
      {"primitives", {kTolerance, check_primitives}},
      {"batch_norm", {kTolerance, check_batch_norm}},
      {"feast_conv", {kTolerance, check_feast}},
      {"recon_loss", {kTolerance, check_recon}},
      {"kl_loss", {kTolerance, check_kl}},
      {"vae_total", {kTolerance, check_vae_total}},
      {"chamfer", {kTolerance, [] { return check_chamfer(ChamferMetric::kEuclidean); }}},
      {"chamfer_squared", {kTolerance, [] { return check_chamfer(ChamferMetric::kSquared); }}},
      {"normal_loss", {kTolerance, check_normal}},
      {"laplacian_loss", {kTolerance, check_laplacian}},
      {"edge_loss", {kTolerance, check_edge}},
      {"rodrigues", {kTolerance, check_rodrigues}},
      {"completion_objective", {kCompletionTolerance, check_completion}},
  };
  return r;
}

}  // namespace

std::vector<std::string> gradient_components() {
  static const std::vector<std::string> order = {
      "primitives", "batch_norm",  "feast_conv",     "recon_loss", "kl_loss",   "vae_total",
      "chamfer",    "chamfer_squared", "normal_loss", "laplacian_loss", "edge_loss", "rodrigues",
      "completion_objective"};
  return order;
}

std::vector<GradientCheck> run_gradient_suite(const std::string& component) {
  std::vector<std::string> names;
  if (component == "all") {
    names = gradient_components();
  } else if (registry().count(component)) {
    names = {component};
  } else {
    throw ContractError("unknown gradient component '" + component + "'");
  }
  std::vector<GradientCheck> out;
  for (const std::string& n : names) {
    const Entry& e = registry().at(n);
    GradientCheck c;
    c.component = n;
    c.tolerance = e.tolerance;
    c.max_relative_error = e.run();
    c.passed = c.max_relative_error < c.tolerance;
    out.push_back(c);
  }
  return out;
}

}  // namespace shapecomp
