#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include "shapecomp/errors.hpp"
#include "shapecomp/gcvae.hpp"
#include "shapecomp/gradcheck.hpp"
#include "shapecomp/linalg.hpp"
#include "testutil.hpp"

using namespace shapecomp;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 20;
  c.batch_size = 2;
  c.latent_size = 4;
  c.heads = 2;
  c.encoder_channels = {4, 4};
  c.generator_channels = {4, 4};
  c.online.enabled = false;
  c.seed = 3;
  return c;
}

std::vector<Mesh> tiny_population(int count) {
  return synth_population(icosphere(1), count, {}, 5);
}

}  // namespace

TEST(Feast, MatchesOracle) {
  CounterRng rng(1);
  const auto topo = testutil::random_topology(10, rng);
  const auto graph = FeastGraph::from_topology(*topo);
  const auto layer = testutil::random_layer(4, 5, 3, rng);
  const Tensor x = testutil::random_tensor(10, 4, rng);
  EXPECT_LT((feast_conv(x, graph, layer) - testutil::feast_oracle(x, *topo, layer)).cwiseAbs().maxCoeff(), 1e-12);
  const Tensor stacked = testutil::random_tensor(30, 4, rng);
  EXPECT_LT((feast_conv(stacked, graph, layer) - testutil::feast_oracle(stacked, *topo, layer)).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Feast, IdentityOnConstantField) {
  const Mesh m = icosphere(1);
  const auto graph = FeastGraph::from_topology(m.topology());
  FeastLayerParams layer{Tensor::Identity(3, 3), Tensor::Zero(1, 3), Tensor::Zero(3, 1), Tensor::Zero(1, 1)};
  const Tensor x = Tensor::Ones(m.vertex_count(), 1) * Eigen::RowVector3d(0.3, -1, 2);
  EXPECT_LT((feast_conv(x, graph, layer) - x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Feast, BiasOnZeroFeatures) {
  const Mesh m = icosphere(1);
  const auto graph = FeastGraph::from_topology(m.topology());
  CounterRng rng(2);
  FeastLayerParams layer = testutil::random_layer(3, 4, 1, rng);
  const Tensor y = feast_conv(Tensor::Zero(m.vertex_count(), 3), graph, layer);
  for (Index i = 0; i < y.rows(); ++i) EXPECT_EQ(y.row(i), layer.bias);
}

TEST(Feast, ShapeMismatch) {
  const auto graph = FeastGraph::from_topology(icosphere(0).topology());
  CounterRng rng(3);
  const auto layer = testutil::random_layer(3, 4, 2, rng);
  EXPECT_THROW(feast_conv(Tensor::Zero(12, 2), graph, layer), ContractError);
  EXPECT_THROW(feast_conv(Tensor::Zero(13, 3), graph, layer), ContractError);
  FeastLayerParams bad = layer;
  bad.bias = Tensor::Zero(1, 3);
  EXPECT_THROW(feast_conv(Tensor::Zero(12, 3), graph, bad), ContractError);
}

TEST(Feast, GraphIsClosedRing) {
  const auto topo = build_topology({{0, 1, 2}}, 3);
  const auto g = FeastGraph::from_topology(*topo);
  EXPECT_EQ(g.size(0), 3);
}

TEST(Feast, Gradient) {
  CounterRng rng(4);
  const auto topo = testutil::random_topology(8, rng);
  const auto graph = FeastGraph::from_topology(*topo);
  const auto layer = testutil::random_layer(3, 2, 3, rng);
  const Tensor x = testutil::random_tensor(16, 3, rng);
  const Tensor w = testutil::random_tensor(16, 2, rng);
  const Program p = [&](Tape& t, std::span<const Var> in) {
    return ad::sum(ad::mul(ad::feast_conv(in[0], graph, in[1], in[2], in[3], in[4]), t.constant(w)));
  };
  const std::vector<Tensor> inputs{x, layer.weight, layer.bias, layer.steer, layer.steer_bias};
  EXPECT_LT(finite_diff_check(p, inputs).max_relative_error, 1e-6);
}

TEST(Assignment, EqualInputsGiveSoftmaxOfBias) {
  CounterRng rng(5);
  const auto layer = testutil::random_layer(3, 2, 4, rng);
  const Eigen::RowVectorXd x = testutil::random_tensor(1, 3, rng);
  const Eigen::VectorXd q = assignment_weights(x, x, layer);
  const Tensor expected = softmax(layer.steer_bias);
  for (int m = 0; m < 4; ++m) EXPECT_NEAR(q[m], expected(0, m), 1e-15);
}

TEST(Assignment, TranslationInvariant) {
  CounterRng rng(6);
  const auto layer = testutil::random_layer(3, 2, 4, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::RowVectorXd a = testutil::random_tensor(1, 3, rng);
    const Eigen::RowVectorXd b = testutil::random_tensor(1, 3, rng);
    const Eigen::RowVectorXd t = testutil::random_tensor(1, 3, rng, 10.0);
    const Eigen::VectorXd q1 = assignment_weights(a, b, layer);
    const Eigen::VectorXd q2 = assignment_weights(a + t, b + t, layer);
    EXPECT_LT((q1 - q2).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Assignment, UniformWhenUntrained) {
  FeastLayerParams layer{Tensor::Zero(3, 8), Tensor::Zero(1, 2), Tensor::Zero(3, 4), Tensor::Zero(1, 4)};
  const Eigen::VectorXd q = assignment_weights(Eigen::RowVector3d(1, 2, 3), Eigen::RowVector3d(-1, 0, 5), layer);
  for (int m = 0; m < 4; ++m) EXPECT_DOUBLE_EQ(q[m], 0.25);
}

TEST(Model, ParameterOrderAndShapes) {
  Architecture arch;
  arch.vertex_count = 42;
  const ModelParams p = init_model(arch, icosphere(1).topology(), 1);
  const auto params = p.parameters();
  EXPECT_EQ(params.front().first, "encoder.conv0.weight");
  EXPECT_EQ(params.back().first, "generator.conv1.steer_bias");
  for (const auto& [name, t] : params) EXPECT_TRUE(t->allFinite()) << name;
  const auto* w = params.front().second;
  EXPECT_EQ(w->rows(), 3);
  EXPECT_EQ(w->cols(), 8 * 16);
  EXPECT_EQ(p.buffers().front().first, "encoder.norm0.running_mean");
}

TEST(Model, InitDeterministic) {
  Architecture arch;
  arch.vertex_count = 42;
  const auto a = init_model(arch, icosphere(1).topology(), 1);
  const auto b = init_model(arch, icosphere(1).topology(), 1);
  const auto c = init_model(arch, icosphere(1).topology(), 2);
  EXPECT_EQ(*a.parameters()[0].second, *b.parameters()[0].second);
  EXPECT_NE(*a.parameters()[0].second, *c.parameters()[0].second);
}

TEST(Model, ArchitectureValidation) {
  Architecture arch;
  EXPECT_THROW(arch.validate(), ContractError);
  arch.vertex_count = 12;
  arch.encoder_channels.clear();
  EXPECT_THROW(arch.validate(), ContractError);
}

TEST(Model, EncodeGenerateShapes) {
  Architecture arch;
  arch.vertex_count = 42;
  const Mesh m = icosphere(1);
  const ShapeModel model(init_model(arch, m.topology(), 1), m.topology_ptr());
  const auto [mu, lv] = encode(m, model);
  EXPECT_EQ(mu.size(), 16);
  EXPECT_EQ(lv.size(), 16);
  EXPECT_TRUE(mu.allFinite() && lv.allFinite());
  const Mesh g = generate(mu, model);
  EXPECT_EQ(g.fingerprint(), m.fingerprint());
  EXPECT_TRUE(g.vertices().allFinite());
}

TEST(Model, FingerprintMismatch) {
  Architecture arch;
  arch.vertex_count = 42;
  const Mesh m = icosphere(1);
  const ShapeModel model(init_model(arch, m.topology(), 1), m.topology_ptr());
  EXPECT_THROW(encode(icosphere(2), model), TopologyError);
  Architecture other = arch;
  other.vertex_count = 162;
  EXPECT_THROW(ShapeModel(init_model(other, icosphere(2).topology(), 1), m.topology_ptr()), TopologyError);
}

TEST(Reparameterize, CollapsedVariance) {
  Eigen::VectorXd mu(3);
  mu << 1, -2, 0.5;
  const Eigen::VectorXd z = reparameterize(mu, Eigen::VectorXd::Constant(3, -50.0), 9);
  EXPECT_LT((z - mu).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Reparameterize, Reproducible) {
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(5);
  const Eigen::VectorXd lv = Eigen::VectorXd::Zero(5);
  EXPECT_EQ(reparameterize(mu, lv, 4), reparameterize(mu, lv, 4));
  EXPECT_NE(reparameterize(mu, lv, 4), reparameterize(mu, lv, 5));
}

TEST(Reparameterize, MonteCarloMean) {
  Eigen::VectorXd mu(3);
  mu << 0.5, -1, 2;
  const Eigen::VectorXd lv = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += reparameterize(mu, lv, derive_seed(12, i));
  EXPECT_LT((sum / n - mu).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Density, UniformIsOne) {
  const Eigen::VectorXd g = density_weights(icosphere(0));
  for (int i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 1.0, 1e-12);
}

TEST(Density, TwoRegions) {
  Tensor v(6, 3);
  v << 0, 0, 0, 2, 0, 0, 1, std::sqrt(3.0), 0, 5, 0, 0, 6, 0, 0, 5.5, std::sqrt(3.0) / 2, 0;
  const Mesh m(v, build_topology({{0, 1, 2}, {3, 4, 5}}, 6));
  const Eigen::VectorXd g = density_weights(m);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(g[i], 4.0 * g[3 + i], 1e-12);
  EXPECT_NEAR(g.mean(), 1.0, 1e-12);
}

TEST(Density, CollapsedRejected) {
  EXPECT_THROW(density_weights(icosphere(0).with_vertices(Tensor::Zero(12, 3))), NumericError);
}

TEST(Recon, Examples) {
  const Mesh m = icosphere(1);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(42);
  EXPECT_EQ(recon_loss(m.vertices(), m.vertices(), ones), 0.0);
  Tensor moved = m.vertices();
  moved(7, 0) += 1.0;
  EXPECT_NEAR(recon_loss(moved, m.vertices(), ones), 1.0 / 42.0, 1e-15);
  EXPECT_THROW(recon_loss(moved.topRows(41), m.vertices(), ones), ContractError);
}

TEST(Recon, BruteForceAndTape) {
  CounterRng rng(7);
  const Tensor a = testutil::random_tensor(20, 3, rng);
  const Tensor b = testutil::random_tensor(20, 3, rng);
  Eigen::VectorXd g(20);
  for (int i = 0; i < 20; ++i) g[i] = rng.uniform(0.5, 2.0);
  double s = 0.0;
  for (int i = 0; i < 20; ++i)
    for (int c = 0; c < 3; ++c) s += g[i] * (a(i, c) - b(i, c)) * (a(i, c) - b(i, c));
  EXPECT_NEAR(recon_loss(a, b, g), s / 20.0, 1e-14);
  Tape tape;
  const Var v = ad::recon_loss(tape.watch(a), tape.constant(b), tape.constant(Tensor(g)));
  EXPECT_NEAR(v.scalar(), s / 20.0, 1e-14);
  const auto check = finite_diff_check(
      [&](Tape& t, Var x) { return ad::recon_loss(x, t.constant(b), t.constant(Tensor(g))); }, a);
  EXPECT_LT(check.max_relative_error, 1e-6);
}

TEST(Kl, Examples) {
  EXPECT_EQ(kl_loss(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)), 0.0);
  EXPECT_NEAR(kl_loss(Eigen::VectorXd::Ones(6), Eigen::VectorXd::Zero(6)), 3.0, 1e-15);
  CounterRng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd mu(5), lv(5);
    for (int d = 0; d < 5; ++d) {
      mu[d] = rng.normal();
      lv[d] = rng.uniform(-5, 5);
    }
    EXPECT_GE(kl_loss(mu, lv), 0.0);
  }
}

TEST(Kl, TapeMatchesAndGradient) {
  CounterRng rng(9);
  const Tensor mu = testutil::random_tensor(3, 4, rng);
  const Tensor lv = testutil::random_tensor(3, 4, rng);
  Tape tape;
  const double v = ad::kl_loss(tape.watch(mu), tape.watch(lv)).scalar();
  double expected = 0.0;
  for (int r = 0; r < 3; ++r) expected += kl_loss(mu.row(r).transpose(), lv.row(r).transpose());
  EXPECT_NEAR(v, expected / 3.0, 1e-14);
  const Program p = [](Tape&, std::span<const Var> in) { return ad::kl_loss(in[0], in[1]); };
  const std::vector<Tensor> inputs{mu, lv};
  EXPECT_LT(finite_diff_check(p, inputs).max_relative_error, 1e-6);
}

TEST(TrainConfig, Defaults) {
  const TrainConfig c;
  EXPECT_EQ(c.epochs, 200);
  EXPECT_EQ(c.learning_rate, 1e-3);
  EXPECT_EQ(c.kl_weight, 1e-6);
  EXPECT_EQ(c.batch_size, 20);
  EXPECT_EQ(c.latent_size, 128);
  EXPECT_EQ(c.heads, 8);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.kl_weight = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RandomSimilarity, RigidWhenScaleFixed) {
  OnlineAugmentation aug;
  aug.scale_min = aug.scale_max = 1.0;
  aug.translation = 0.0;
  aug.max_rotation = 0.3;
  const Tensor x = testutil::bumpy_sphere(1, 1, 0.2).vertices();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor y = random_similarity(x, aug, s);
    const auto fit = fit_rigid(x, y);
    const Tensor back = ((x * fit.rotation.transpose()).rowwise() + fit.translation.transpose()).eval();
    EXPECT_LT(max_row_distance(back, y), 1e-12);
    EXPECT_LE(Eigen::AngleAxisd(fit.rotation).angle(), 0.3 + 1e-12);
    EXPECT_LT((centroid(y) - centroid(x)).norm(), 1e-12);
  }
}

TEST(RandomSimilarity, ScaleAndTranslationBounds) {
  OnlineAugmentation aug;
  const Tensor x = icosphere(1).vertices();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor y = random_similarity(x, aug, s);
    const double scale = (y.row(0) - y.row(1)).norm() / (x.row(0) - x.row(1)).norm();
    EXPECT_GE(scale, 0.9 - 1e-12);
    EXPECT_LE(scale, 1.1 + 1e-12);
    EXPECT_LE((centroid(y) - centroid(x)).cwiseAbs().maxCoeff(), 0.1 + 1e-12);
  }
}

TEST(Train, DeterministicAndLogged) {
  const auto data = tiny_population(4);
  const TrainConfig c = tiny_config();
  int seen = 0;
  const auto a = train(data, c, [&](const TrainLogEntry&) { ++seen; });
  const auto b = train(data, c);
  EXPECT_EQ(seen, c.epochs);
  ASSERT_EQ(a.log.size(), static_cast<std::size_t>(c.epochs));
  for (std::size_t k = 0; k < a.log.size(); ++k) EXPECT_EQ(a.log[k].total, b.log[k].total);
  const auto pa = a.model.params().parameters();
  const auto pb = b.model.params().parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(*pa[k].second, *pb[k].second);
  EXPECT_LT(a.log.back().recon, a.log.front().recon);
}

TEST(Train, RunningStatsMove) {
  const auto data = tiny_population(4);
  TrainConfig c = tiny_config();
  c.epochs = 2;
  const auto r = train(data, c);
  EXPECT_NE(r.model.params().encoder_stats[0].mean, Tensor::Zero(1, 4));
}

TEST(Train, WithAugmentations) {
  const auto data = tiny_population(3);
  TrainConfig c = tiny_config();
  c.epochs = 3;
  c.online.enabled = true;
  c.spectral_augmentation = true;
  c.spectral_copies = 2;
  const auto r = train(data, c);
  EXPECT_TRUE(std::isfinite(r.log.back().total));
}

TEST(Train, DivergenceNamesEpoch) {
  const auto data = tiny_population(2);
  TrainConfig c = tiny_config();
  c.learning_rate = 1e200;
  c.epochs = 50;
  try {
    train(data, c);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
  }
}

TEST(Train, KlWeightZeroFitsTighter) {
  const auto data = tiny_population(1);
  TrainConfig c = tiny_config();
  c.batch_size = 1;
  c.epochs = 100;
  c.kl_weight = 0.0;
  const double free = train(data, c).log.back().recon;
  c.kl_weight = 1e-6;
  const double regularized = train(data, c).log.back().recon;
  EXPECT_LT(free, regularized);
}

TEST(Evaluate, MatchesManualLoss) {
  const auto data = tiny_population(2);
  TrainConfig c = tiny_config();
  c.epochs = 2;
  const auto r = train(data, c);
  double s = 0.0;
  for (const Mesh& m : data) {
    const Mesh g = generate(encode(m, r.model).first, r.model);
    s += recon_loss(g.vertices(), m.vertices(), density_weights(m));
  }
  EXPECT_NEAR(evaluate_reconstruction(data, r.model), s / 2.0, 1e-12);
}
