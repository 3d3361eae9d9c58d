#include "shapecomp/gcvae.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "shapecomp/adam.hpp"
#include "shapecomp/errors.hpp"
#include "shapecomp/rng.hpp"

namespace shapecomp {

FeastGraph FeastGraph::from_topology(const Topology& topology) {
  FeastGraph g;
  g.vertex_count = static_cast<int>(topology.vertex_count());
  g.offsets.assign(1, 0);
  g.indices.reserve(topology.neighbor_indices().size() + g.vertex_count);
  for (int i = 0; i < g.vertex_count; ++i) {
    const auto nbrs = topology.neighbors(i);
    bool placed = false;
    for (int j : nbrs) {
      if (!placed && i < j) {
        g.indices.push_back(i);
        placed = true;
      }
      g.indices.push_back(j);
    }
    if (!placed) g.indices.push_back(i);
    g.offsets.push_back(static_cast<int>(g.indices.size()));
  }
  return g;
}

namespace {

void check_layer(const FeastLayerParams& layer) {
  const Index in = layer.steer.rows();
  const Index m = layer.steer.cols();
  const Index out = layer.bias.cols();
  if (m < 1) throw ContractError("feast_conv: need at least one weight matrix");
  if (layer.weight.rows() != in || layer.weight.cols() != m * out || layer.bias.rows() != 1 ||
      layer.steer_bias.rows() != 1 || layer.steer_bias.cols() != m) {
    throw ContractError("feast_conv: inconsistent layer shapes");
  }
}

void softmax_inplace(double* a, Index m) {
  double mx = a[0];
  for (Index k = 1; k < m; ++k) mx = std::max(mx, a[k]);
  double total = 0.0;
  for (Index k = 0; k < m; ++k) {
    a[k] = std::exp(a[k] - mx);
    total += a[k];
  }
  for (Index k = 0; k < m; ++k) a[k] /= total;
}

struct FeastForward {
  Tensor out;
  Tensor xw;  // rows x (M*out)
  Tensor q;   // (pairs) x M, pair order: copy, vertex, neighbor
};

FeastForward feast_forward(const Tensor& x, const FeastGraph& graph, const Tensor& weight,
                           const Tensor& bias, const Tensor& steer, const Tensor& steer_bias,
                           bool keep) {
  const Index n = graph.vertex_count;
  if (n == 0 || x.rows() % n != 0) throw ContractError("feast_conv: feature rows must be a multiple of N");
  if (x.cols() != steer.rows()) throw ContractError("feast_conv: feature width does not match layer input");
  const Index copies = x.rows() / n;
  const Index m = steer.cols();
  const Index out_c = bias.cols();
  FeastForward f;
  f.xw = x * weight;
  const Tensor xu = x * steer;
  f.out = Tensor::Zero(x.rows(), out_c);
  const Index pairs = static_cast<Index>(graph.indices.size());
  if (keep) f.q.resize(copies * pairs, m);
  Eigen::VectorXd a(m);
  for (Index b = 0; b < copies; ++b) {
    for (Index i = 0; i < n; ++i) {
      const Index r = b * n + i;
      const double inv_deg = 1.0 / graph.size(static_cast<int>(i));
      for (int k = graph.offsets[i]; k < graph.offsets[i + 1]; ++k) {
        const Index s = b * n + graph.indices[k];
        for (Index h = 0; h < m; ++h) a[h] = xu(s, h) - xu(r, h) + steer_bias(0, h);
        softmax_inplace(a.data(), m);
        for (Index h = 0; h < m; ++h) {
          f.out.row(r) += (a[h] * inv_deg) * f.xw.row(s).segment(h * out_c, out_c);
        }
        if (keep) f.q.row(b * pairs + k) = a.transpose();
      }
      f.out.row(r) += bias;
    }
  }
  return f;
}

}  // namespace

Eigen::VectorXd assignment_weights(const Eigen::RowVectorXd& x_i, const Eigen::RowVectorXd& x_j,
                                   const FeastLayerParams& layer) {
  check_layer(layer);
  if (x_i.size() != layer.in_channels() || x_j.size() != layer.in_channels()) {
    throw ContractError("assignment_weights: feature width does not match layer input");
  }
  const Eigen::RowVectorXd d = x_j - x_i;
  Eigen::VectorXd a = (d * layer.steer + layer.steer_bias).transpose();
  softmax_inplace(a.data(), a.size());
  return a;
}

Tensor feast_conv(const Tensor& features, const FeastGraph& graph, const FeastLayerParams& layer) {
  check_layer(layer);
  return feast_forward(features, graph, layer.weight, layer.bias, layer.steer, layer.steer_bias, false).out;
}

namespace ad {

Var feast_conv(Var features, const FeastGraph& graph, Var weight, Var bias, Var steer, Var steer_bias) {
  Tape& t = *features.tape();
  for (Var v : {weight, bias, steer, steer_bias}) {
    if (v.tape() != &t) throw ContractError("feast_conv: operands on different tapes");
  }
  check_layer({weight.value(), bias.value(), steer.value(), steer_bias.value()});
  FeastForward f = feast_forward(features.value(), graph, weight.value(), bias.value(), steer.value(),
                                 steer_bias.value(), true);
  const bool needs = t.requires_grad(features) || t.requires_grad(weight) || t.requires_grad(bias) ||
                     t.requires_grad(steer) || t.requires_grad(steer_bias);
  return t.record(
      "feast_conv", std::move(f.out), needs,
      [features, weight, bias, steer, steer_bias, &graph, xw = std::move(f.xw), q = std::move(f.q)](
          const Tensor& g, Tape& tp) {
        const Tensor& x = features.value();
        const Index n = graph.vertex_count;
        const Index copies = x.rows() / n;
        const Index m = steer.value().cols();
        const Index out_c = bias.value().cols();
        const Index pairs = static_cast<Index>(graph.indices.size());
        Tensor dxw = Tensor::Zero(xw.rows(), xw.cols());
        Tensor dxu = Tensor::Zero(x.rows(), m);
        Tensor dc = Tensor::Zero(1, m);
        Eigen::VectorXd dq(m);
        for (Index b = 0; b < copies; ++b) {
          for (Index i = 0; i < n; ++i) {
            const Index r = b * n + i;
            const double inv_deg = 1.0 / graph.size(static_cast<int>(i));
            const auto gr = g.row(r);
            for (int k = graph.offsets[i]; k < graph.offsets[i + 1]; ++k) {
              const Index s = b * n + graph.indices[k];
              const auto qk = q.row(b * pairs + k);
              double dot = 0.0;
              for (Index h = 0; h < m; ++h) {
                dxw.row(s).segment(h * out_c, out_c) += (qk(h) * inv_deg) * gr;
                dq[h] = inv_deg * gr.dot(xw.row(s).segment(h * out_c, out_c));
                dot += qk(h) * dq[h];
              }
              for (Index h = 0; h < m; ++h) {
                const double da = qk(h) * (dq[h] - dot);
                dxu(s, h) += da;
                dxu(r, h) -= da;
                dc(0, h) += da;
              }
            }
          }
        }
        if (tp.requires_grad(bias)) tp.accumulate(bias, g.colwise().sum());
        if (tp.requires_grad(steer_bias)) tp.accumulate(steer_bias, dc);
        if (tp.requires_grad(weight)) tp.accumulate(weight, x.transpose() * dxw);
        if (tp.requires_grad(steer)) tp.accumulate(steer, x.transpose() * dxu);
        if (tp.requires_grad(features)) {
          tp.accumulate(features, dxw * weight.value().transpose() + dxu * steer.value().transpose());
        }
      });
}

}  // namespace ad

// ---------------------------------------------------------------------------

void Architecture::validate() const {
  if (vertex_count < 1) throw ContractError("architecture: vertex_count must be positive");
  if (latent_size < 1) throw ContractError("architecture: latent_size must be positive");
  if (heads < 1) throw ContractError("architecture: heads must be at least 1");
  if (encoder_channels.empty() || generator_channels.empty()) {
    throw ContractError("architecture: encoder and generator need at least one layer");
  }
  for (int c : encoder_channels) {
    if (c < 1) throw ContractError("architecture: channel widths must be positive");
  }
  for (int c : generator_channels) {
    if (c < 1) throw ContractError("architecture: channel widths must be positive");
  }
  if (!(leaky_slope >= 0.0) || !std::isfinite(leaky_slope)) {
    throw ContractError("architecture: leaky_slope must be finite and nonnegative");
  }
}

namespace {

template <typename P, typename Net>
std::vector<std::pair<std::string, P*>> collect_weights(Net& net) {
  std::vector<std::pair<std::string, P*>> out;
  Net::visit(net, [&](const std::string& name, P& t) { out.emplace_back(name, &t); });
  return out;
}

template <typename P, typename Params>
std::vector<std::pair<std::string, P*>> collect_buffers(Params& p) {
  std::vector<std::pair<std::string, P*>> out;
  for (std::size_t l = 0; l < p.encoder_stats.size(); ++l) {
    const std::string n = "encoder.norm" + std::to_string(l) + ".";
    out.emplace_back(n + "running_mean", &p.encoder_stats[l].mean);
    out.emplace_back(n + "running_var", &p.encoder_stats[l].variance);
  }
  for (std::size_t l = 0; l < p.generator_stats.size(); ++l) {
    const std::string n = "generator.norm" + std::to_string(l) + ".";
    out.emplace_back(n + "running_mean", &p.generator_stats[l].mean);
    out.emplace_back(n + "running_var", &p.generator_stats[l].variance);
  }
  return out;
}

Tensor glorot(Index rows, Index cols, double fan_in, double fan_out, CounterRng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-limit, limit);
  return t;
}

Tensor gaussian(Index rows, Index cols, double sigma, CounterRng& rng) {
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = sigma * rng.normal();
  return t;
}

Weights::Conv init_conv(int in, int out, int heads, CounterRng& rng) {
  Weights::Conv c;
  c.weight = glorot(in, static_cast<Index>(heads) * out, in, out, rng);
  c.bias = Tensor::Zero(1, out);
  c.steer = gaussian(in, heads, 0.1, rng);
  c.steer_bias = gaussian(1, heads, 0.1, rng);
  return c;
}

Weights::Norm init_norm(int c) { return {Tensor::Ones(1, c), Tensor::Zero(1, c)}; }
RunningStats init_stats(int c) { return {Tensor::Zero(1, c), Tensor::Ones(1, c)}; }

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParams::parameters() {
  return collect_weights<Tensor>(weights);
}
std::vector<std::pair<std::string, const Tensor*>> ModelParams::parameters() const {
  return collect_weights<const Tensor>(weights);
}
std::vector<std::pair<std::string, Tensor*>> ModelParams::buffers() { return collect_buffers<Tensor>(*this); }
std::vector<std::pair<std::string, const Tensor*>> ModelParams::buffers() const {
  return collect_buffers<const Tensor>(*this);
}

ModelParams allocate_model(const Architecture& arch, std::string fingerprint) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  p.fingerprint = std::move(fingerprint);
  const Index n = arch.vertex_count;
  const Index latent = arch.latent_size;
  const Index heads = arch.heads;
  auto conv = [&](Index in, Index out) {
    return Weights::Conv{Tensor::Zero(in, heads * out), Tensor::Zero(1, out), Tensor::Zero(in, heads),
                         Tensor::Zero(1, heads)};
  };
  Index in = 3;
  for (int c : arch.encoder_channels) {
    p.weights.encoder_convs.push_back(conv(in, c));
    if (arch.batch_norm) {
      p.weights.encoder_norms.push_back(init_norm(c));
      p.encoder_stats.push_back(init_stats(c));
    }
    in = c;
  }
  p.weights.encoder_head = {Tensor::Zero(n * in, 2 * latent), Tensor::Zero(1, 2 * latent)};
  const Index g0 = arch.generator_channels.front();
  p.weights.generator_head = {Tensor::Zero(latent, n * g0), Tensor::Zero(1, n * g0)};
  if (arch.batch_norm) {
    p.weights.generator_norms.push_back(init_norm(static_cast<int>(g0)));
    p.generator_stats.push_back(init_stats(static_cast<int>(g0)));
  }
  for (std::size_t l = 0; l < arch.generator_channels.size(); ++l) {
    const bool last = l + 1 == arch.generator_channels.size();
    const int cout = last ? 3 : arch.generator_channels[l + 1];
    p.weights.generator_convs.push_back(conv(arch.generator_channels[l], cout));
    if (!last && arch.batch_norm) {
      p.weights.generator_norms.push_back(init_norm(cout));
      p.generator_stats.push_back(init_stats(cout));
    }
  }
  return p;
}

ModelParams init_model(const Architecture& arch, const Topology& topology, std::uint64_t seed) {
  arch.validate();
  if (arch.vertex_count != static_cast<int>(topology.vertex_count())) {
    throw ContractError("init_model: architecture vertex_count does not match topology");
  }
  CounterRng rng(seed);
  ModelParams p;
  p.arch = arch;
  p.fingerprint = topology.fingerprint();
  const int n = arch.vertex_count;
  const int latent = arch.latent_size;

  int in = 3;
  for (int c : arch.encoder_channels) {
    p.weights.encoder_convs.push_back(init_conv(in, c, arch.heads, rng));
    if (arch.batch_norm) {
      p.weights.encoder_norms.push_back(init_norm(c));
      p.encoder_stats.push_back(init_stats(c));
    }
    in = c;
  }
  const Index flat = static_cast<Index>(n) * in;
  p.weights.encoder_head = {glorot(flat, 2 * latent, flat, 2 * latent, rng), Tensor::Zero(1, 2 * latent)};

  const int g0 = arch.generator_channels.front();
  const Index gflat = static_cast<Index>(n) * g0;
  p.weights.generator_head = {glorot(latent, gflat, latent, gflat, rng), Tensor::Zero(1, gflat)};
  if (arch.batch_norm) {
    p.weights.generator_norms.push_back(init_norm(g0));
    p.generator_stats.push_back(init_stats(g0));
  }
  for (std::size_t l = 0; l < arch.generator_channels.size(); ++l) {
    const int cin = arch.generator_channels[l];
    const bool last = l + 1 == arch.generator_channels.size();
    const int cout = last ? 3 : arch.generator_channels[l + 1];
    p.weights.generator_convs.push_back(init_conv(cin, cout, arch.heads, rng));
    if (!last && arch.batch_norm) {
      p.weights.generator_norms.push_back(init_norm(cout));
      p.generator_stats.push_back(init_stats(cout));
    }
  }
  return p;
}

ShapeModel::ShapeModel(ModelParams params, TopologyPtr topology)
    : params_(std::move(params)), topology_(std::move(topology)) {
  if (!topology_) throw ContractError("ShapeModel: null topology");
  if (params_.fingerprint.empty()) throw ContractError("ShapeModel: empty fingerprint");
  require_same_topology(params_.fingerprint, topology_->fingerprint(), "model");
  if (params_.arch.vertex_count != static_cast<int>(topology_->vertex_count())) {
    throw TopologyError("model: vertex count does not match topology");
  }
  graph_ = FeastGraph::from_topology(*topology_);
}

WeightVars bind_weights(Tape& tape, const ModelParams& params, bool watch, BindScope scope) {
  return params.weights.map<Var>([&](const std::string& name, const Tensor& v) {
    const bool encoder = name.rfind("encoder.", 0) == 0;
    if ((scope == BindScope::kEncoder && !encoder) || (scope == BindScope::kGenerator && encoder)) return Var();
    return watch ? tape.watch(v) : tape.constant(v);
  });
}

namespace {

Var conv(const WeightVars::Conv& c, const FeastGraph& graph, Var x) {
  return ad::feast_conv(x, graph, c.weight, c.bias, c.steer, c.steer_bias);
}

Var dense(const WeightVars::Dense& d, Var x) { return ad::add_row(ad::matmul(x, d.weight), d.bias); }

Var norm_act(const ModelParams& params, const WeightVars::Norm* norm, const RunningStats* stats, Var x,
             bool training, std::vector<ad::BatchNormStats>* out) {
  if (norm) {
    ad::BatchNormStats s;
    x = ad::batch_norm(x, norm->gamma, norm->beta, stats->mean, stats->variance, training, kNormEpsilon,
                       training ? &s : nullptr);
    if (training && out) out->push_back(std::move(s));
  }
  return ad::leaky_relu(x, params.arch.leaky_slope);
}

}  // namespace

EncoderOutputs encode_on_tape(const ModelParams& params, const WeightVars& w, const FeastGraph& graph,
                              Var features, int batch, bool training,
                              std::vector<ad::BatchNormStats>* stats) {
  const Index n = params.arch.vertex_count;
  if (features.rows() != batch * n || features.cols() != 3) {
    throw ContractError("encode: expected " + std::to_string(batch * n) + "x3 features");
  }
  Var h = features;
  for (std::size_t l = 0; l < w.encoder_convs.size(); ++l) {
    h = conv(w.encoder_convs[l], graph, h);
    const bool has_norm = l < w.encoder_norms.size();
    h = norm_act(params, has_norm ? &w.encoder_norms[l] : nullptr, has_norm ? &params.encoder_stats[l] : nullptr,
                 h, training, stats);
  }
  h = ad::reshape(h, batch, n * h.cols());
  Var head = dense(w.encoder_head, h);
  const Index latent = params.arch.latent_size;
  return {ad::slice_cols(head, 0, latent), ad::slice_cols(head, latent, latent)};
}

Var generate_on_tape(const ModelParams& params, const WeightVars& w, const FeastGraph& graph, Var latent,
                     bool training, std::vector<ad::BatchNormStats>* stats) {
  const Index n = params.arch.vertex_count;
  if (latent.cols() != params.arch.latent_size) {
    throw ContractError("generate: latent width " + std::to_string(latent.cols()) + " != " +
                        std::to_string(params.arch.latent_size));
  }
  const Index batch = latent.rows();
  Var h = dense(w.generator_head, latent);
  h = ad::reshape(h, batch * n, h.cols() / n);
  std::size_t norm_index = 0;
  auto next_norm = [&](Var x) {
    const bool has_norm = norm_index < w.generator_norms.size();
    Var y = norm_act(params, has_norm ? &w.generator_norms[norm_index] : nullptr,
                     has_norm ? &params.generator_stats[norm_index] : nullptr, x, training, stats);
    ++norm_index;
    return y;
  };
  h = next_norm(h);
  for (std::size_t l = 0; l < w.generator_convs.size(); ++l) {
    h = conv(w.generator_convs[l], graph, h);
    if (l + 1 < w.generator_convs.size()) h = next_norm(h);
  }
  return h;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> encode(const Mesh& mesh, const ShapeModel& model) {
  require_same_topology(model.params().fingerprint, mesh.fingerprint(), "encode");
  Tape tape;
  const WeightVars w = bind_weights(tape, model.params(), false, BindScope::kEncoder);
  const EncoderOutputs e =
      encode_on_tape(model.params(), w, model.graph(), tape.constant(mesh.vertices()), 1, false);
  return {e.mean.value().row(0).transpose(), e.log_variance.value().row(0).transpose()};
}

Eigen::VectorXd reparameterize(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_variance,
                               std::uint64_t seed) {
  if (mean.size() != log_variance.size()) throw ContractError("reparameterize: shape mismatch");
  CounterRng rng(seed);
  Eigen::VectorXd z(mean.size());
  for (Index d = 0; d < mean.size(); ++d) z[d] = mean[d] + std::exp(0.5 * log_variance[d]) * rng.normal();
  return z;
}

Mesh generate(const Eigen::VectorXd& latent, const ShapeModel& model) {
  Tape tape;
  const WeightVars w = bind_weights(tape, model.params(), false, BindScope::kGenerator);
  const Var out = generate_on_tape(model.params(), w, model.graph(), tape.constant(latent.transpose()), false);
  return Mesh(out.value(), model.topology_ptr());
}

// ---------------------------------------------------------------------------

Eigen::VectorXd density_weights(const Mesh& mesh) {
  const Topology& topo = mesh.topology();
  const Tensor& v = mesh.vertices();
  const Index n = mesh.vertex_count();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const auto nbrs = topo.neighbors(static_cast<int>(i));
    if (nbrs.empty()) continue;
    for (int j : nbrs) s[i] += (v.row(i) - v.row(j)).squaredNorm();
    s[i] /= static_cast<double>(nbrs.size());
  }
  const double mean = s.mean();
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    throw NumericError("density_weights: degenerate geometry (all edges have zero length)");
  }
  return s / mean;
}

double recon_loss(const Tensor& generated, const Tensor& target, const Eigen::VectorXd& gamma) {
  if (generated.rows() != target.rows() || generated.cols() != target.cols() ||
      gamma.size() != target.rows()) {
    throw ContractError("recon_loss: vertex count mismatch");
  }
  double total = 0.0;
  for (Index i = 0; i < target.rows(); ++i) total += gamma[i] * (generated.row(i) - target.row(i)).squaredNorm();
  return total / static_cast<double>(target.rows());
}

double kl_loss(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_variance) {
  if (mean.size() != log_variance.size()) throw ContractError("kl_loss: shape mismatch");
  double total = 0.0;
  for (Index d = 0; d < mean.size(); ++d) {
    total += 1.0 + log_variance[d] - mean[d] * mean[d] - std::exp(log_variance[d]);
  }
  return -0.5 * total;
}

namespace ad {

Var recon_loss(Var generated, Var target, Var gamma) {
  if (generated.rows() != target.rows() || generated.cols() != target.cols() || gamma.rows() != target.rows() ||
      gamma.cols() != 1) {
    throw ContractError("recon_loss: shape mismatch");
  }
  Var per_vertex = row_sum(square(sub(generated, target)));
  return scale(sum(mul(per_vertex, gamma)), 1.0 / static_cast<double>(target.rows()));
}

Var kl_loss(Var mean, Var log_variance) {
  const Index batch = mean.rows();
  Var inner = sub(sub(log_variance, square(mean)), exp(log_variance));
  const double count = static_cast<double>(mean.rows() * mean.cols());
  // sum(1 + lv - mu^2 - e^lv) = count + sum(lv - mu^2 - e^lv)
  Var total = sum(inner);
  Tape& t = *mean.tape();
  Var shifted = add(total, t.constant(Tensor::Constant(1, 1, count)));
  return scale(shifted, -0.5 / static_cast<double>(batch));
}

}  // namespace ad

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be positive");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (latent_size < 1) throw ConfigError("train: latent_size must be positive");
  if (heads < 1) throw ConfigError("train: heads must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train: learning_rate must be positive");
  if (!(kl_weight >= 0.0) || !std::isfinite(kl_weight)) throw ConfigError("train: kl_weight must be nonnegative");
  if (online.scale_min <= 0.0 || online.scale_max < online.scale_min) throw ConfigError("train: invalid scale range");
  if (online.translation < 0.0 || online.max_rotation < 0.0) throw ConfigError("train: invalid augmentation range");
  if (spectral_augmentation && spectral_copies < 1) throw ConfigError("train: spectral_copies must be positive");
}

Architecture TrainConfig::architecture(int vertex_count) const {
  Architecture a;
  a.vertex_count = vertex_count;
  a.latent_size = latent_size;
  a.heads = heads;
  a.encoder_channels = encoder_channels;
  a.generator_channels = generator_channels;
  a.leaky_slope = leaky_slope;
  a.batch_norm = batch_norm;
  return a;
}

Tensor random_similarity(const Tensor& vertices, const OnlineAugmentation& aug, std::uint64_t seed) {
  CounterRng rng(seed);
  constexpr double kPi = 3.141592653589793;
  Mat3 rot;
  if (aug.max_rotation >= kPi) {
    Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    if (q.norm() == 0.0) q = Eigen::Vector4d(1, 0, 0, 0);
    q.normalize();
    rot = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
  } else {
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    if (axis.norm() == 0.0) axis = Vec3::UnitZ();
    const double angle = rng.uniform(-aug.max_rotation, aug.max_rotation);
    rot = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  }
  const double s = rng.uniform(aug.scale_min, aug.scale_max);
  const Vec3 t(rng.uniform(-aug.translation, aug.translation), rng.uniform(-aug.translation, aug.translation),
               rng.uniform(-aug.translation, aug.translation));
  const Vec3 c = centroid(vertices);
  Tensor out(vertices.rows(), 3);
  for (Index i = 0; i < vertices.rows(); ++i) {
    const Vec3 p = vertices.row(i).transpose() - c;
    out.row(i) = (s * (rot * p) + c + t).transpose();
  }
  return out;
}

TrainResult train(const std::vector<Mesh>& dataset, const TrainConfig& config,
                  const std::function<void(const TrainLogEntry&)>& on_epoch) {
  config.validate();
  if (dataset.empty()) throw ContractError("train: empty dataset");
  const TopologyPtr topology = dataset.front().topology_ptr();
  for (const Mesh& m : dataset) require_same_topology(topology->fingerprint(), m.fingerprint(), "train");

  std::vector<Mesh> samples = dataset;
  if (config.spectral_augmentation) {
    const auto basis = spectral_basis(*topology);
    for (std::size_t k = 0; k < dataset.size(); ++k) {
      for (int c = 0; c < config.spectral_copies; ++c) {
        PerturbationSpec spec = config.spectral;
        spec.seed = derive_seed(derive_seed(config.seed ^ 0x5bd1e995ULL, k), static_cast<std::uint64_t>(c));
        samples.push_back(spectral_augment(dataset[k], *basis, spec));
      }
    }
  }
  std::vector<Eigen::VectorXd> gammas;
  gammas.reserve(samples.size());
  for (const Mesh& m : samples) gammas.push_back(density_weights(m));

  const int n = static_cast<int>(topology->vertex_count());
  ModelParams params = init_model(config.architecture(n), *topology, derive_seed(config.seed, 0));
  const FeastGraph graph = FeastGraph::from_topology(*topology);
  auto named = params.parameters();
  std::vector<Tensor*> param_ptrs;
  for (auto& [name, t] : named) param_ptrs.push_back(t);
  AdamState adam(AdamConfig{config.learning_rate}, std::span<const Tensor* const>(
                                                       const_cast<const Tensor* const*>(param_ptrs.data()),
                                                       param_ptrs.size()));

  const auto start = std::chrono::steady_clock::now();
  std::vector<TrainLogEntry> log;
  const std::size_t count = samples.size();
  const int latent = config.latent_size;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(config.seed, 1 + static_cast<std::uint64_t>(epoch));
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    CounterRng shuffle(derive_seed(epoch_seed, 0));
    for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double recon_sum = 0.0;
    double kl_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t first = 0; first < count; first += config.batch_size, ++batch_index) {
      const std::size_t last = std::min(count, first + static_cast<std::size_t>(config.batch_size));
      const int b = static_cast<int>(last - first);
      Tensor x(static_cast<Index>(b) * n, 3);
      Tensor gamma(static_cast<Index>(b) * n, 1);
      for (int k = 0; k < b; ++k) {
        const std::size_t idx = order[first + k];
        const Tensor& v = samples[idx].vertices();
        x.middleRows(static_cast<Index>(k) * n, n) =
            config.online.enabled ? random_similarity(v, config.online, derive_seed(epoch_seed, 1 + idx)) : v;
        gamma.middleRows(static_cast<Index>(k) * n, n) = gammas[idx];
      }
      Tensor eps(b, latent);
      CounterRng noise(derive_seed(derive_seed(epoch_seed, count + 1), batch_index));
      for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = noise.normal();

      double recon_value = 0.0;
      double kl_value = 0.0;
      std::vector<Tensor> grads;
      std::vector<ad::BatchNormStats> stats;
      try {
        Tape tape;
        const WeightVars w = bind_weights(tape, params, true);
        const Var xv = tape.constant(x);
        const EncoderOutputs e = encode_on_tape(params, w, graph, xv, b, true, &stats);
        const Var z = ad::add(e.mean, ad::mul(ad::exp(ad::scale(e.log_variance, 0.5)), tape.constant(eps)));
        const Var xr = generate_on_tape(params, w, graph, z, true, &stats);
        const Var recon = ad::recon_loss(xr, xv, tape.constant(gamma));
        const Var kl = ad::kl_loss(e.mean, e.log_variance);
        const Var total = ad::add(recon, ad::scale(kl, config.kl_weight));
        recon_value = recon.scalar();
        kl_value = kl.scalar();
        tape.backward(total);
        std::vector<Var> wv;
        WeightVars::visit(w, [&](const std::string&, const Var& v) { wv.push_back(v); });
        for (const Var& v : wv) grads.push_back(tape.gradient(v));
      } catch (const NumericError& err) {
        throw DivergenceError(static_cast<std::size_t>(epoch),
                              "non-finite value in batch " + std::to_string(batch_index) + " (" + err.what() + ")");
      }
      for (const Tensor& g : grads) {
        if (!g.allFinite()) {
          throw DivergenceError(static_cast<std::size_t>(epoch),
                                "non-finite gradient in batch " + std::to_string(batch_index));
        }
      }
      std::vector<const Tensor*> grad_ptrs;
      for (const Tensor& g : grads) grad_ptrs.push_back(&g);
      adam.step(param_ptrs, grad_ptrs);

      std::vector<RunningStats*> running;
      for (auto& s : params.encoder_stats) running.push_back(&s);
      for (auto& s : params.generator_stats) running.push_back(&s);
      for (std::size_t k = 0; k < running.size() && k < stats.size(); ++k) {
        running[k]->mean = kNormMomentum * running[k]->mean + (1.0 - kNormMomentum) * stats[k].mean;
        running[k]->variance = kNormMomentum * running[k]->variance + (1.0 - kNormMomentum) * stats[k].variance;
      }
      recon_sum += recon_value * b;
      kl_sum += kl_value * b;
    }
    TrainLogEntry entry;
    entry.epoch = epoch;
    entry.recon = recon_sum / static_cast<double>(count);
    entry.kl = kl_sum / static_cast<double>(count);
    entry.total = entry.recon + config.kl_weight * entry.kl;
    entry.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(entry.total)) throw DivergenceError(static_cast<std::size_t>(epoch), "non-finite epoch loss");
    log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return {ShapeModel(std::move(params), topology), std::move(log)};
}

double evaluate_reconstruction(const std::vector<Mesh>& meshes, const ShapeModel& model) {
  if (meshes.empty()) throw ContractError("evaluate_reconstruction: no meshes");
  double total = 0.0;
  for (const Mesh& m : meshes) {
    const auto [mu, lv] = encode(m, model);
    const Mesh out = generate(mu, model);
    total += recon_loss(out.vertices(), m.vertices(), density_weights(m));
  }
  return total / static_cast<double>(meshes.size());
}

}  // namespace shapecomp
