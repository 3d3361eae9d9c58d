#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "shapecomp/mesh.hpp"
#include "shapecomp/ops.hpp"
#include "shapecomp/spectral.hpp"
#include "shapecomp/tape.hpp"

namespace shapecomp {

// ---------------------------------------------------------------------------
// Feature-steered graph convolution
// ---------------------------------------------------------------------------

/// Closed neighborhoods (vertex itself plus its 1-ring) in CSR form. The
/// convolution averages over these, so a vertex's own feature always
/// contributes.
struct FeastGraph {
  int vertex_count = 0;
  std::vector<int> offsets;
  std::vector<int> indices;

  static FeastGraph from_topology(const Topology& topology);
  int size(int vertex) const { return offsets[vertex + 1] - offsets[vertex]; }
};

/// One convolution layer with M weight matrices.
///   weight:     in x (M*out), block m is W_m transposed to act on row features
///   bias:       1 x out
///   steer:      in x M, column m is u_m
///   steer_bias: 1 x M, entry m is c_m
struct FeastLayerParams {
  Tensor weight;
  Tensor bias;
  Tensor steer;
  Tensor steer_bias;

  int heads() const { return static_cast<int>(steer.cols()); }
  int in_channels() const { return static_cast<int>(steer.rows()); }
  int out_channels() const { return static_cast<int>(bias.cols()); }
};

/// q_m(x_i, x_j) = softmax_m(u_m . (x_j - x_i) + c_m).
Eigen::VectorXd assignment_weights(const Eigen::RowVectorXd& x_i, const Eigen::RowVectorXd& x_j,
                                   const FeastLayerParams& layer);

/// y_i = b + 1/|N_i| sum_{j in N_i} sum_m q_m(x_i, x_j) W_m x_j.
/// `features` may stack several meshes over one graph (rows = k * N).
Tensor feast_conv(const Tensor& features, const FeastGraph& graph, const FeastLayerParams& layer);

namespace ad {
Var feast_conv(Var features, const FeastGraph& graph, Var weight, Var bias, Var steer,
               Var steer_bias);
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct Architecture {
  int vertex_count = 0;
  int latent_size = 16;
  int heads = 8;
  std::vector<int> encoder_channels{16, 32};
  std::vector<int> generator_channels{32, 16};
  double leaky_slope = 0.02;
  bool batch_norm = true;

  void validate() const;
};

/// Learnable tensors of the encoder/generator pair, generic over the slot
/// type so the same layout serves values (Tensor) and tape handles (Var).
template <typename T>
struct Network {
  struct Conv {
    T weight, bias, steer, steer_bias;
  };
  struct Dense {
    T weight, bias;
  };
  struct Norm {
    T gamma, beta;
  };

  std::vector<Conv> encoder_convs;
  std::vector<Norm> encoder_norms;
  Dense encoder_head;    // flattened features -> [mean | log-variance]
  Dense generator_head;  // latent -> flattened features
  std::vector<Norm> generator_norms;
  std::vector<Conv> generator_convs;

  /// Visits every slot in canonical (checkpoint) order.
  template <typename Self, typename F>
  static void visit(Self& net, F&& f) {
    for (std::size_t l = 0; l < net.encoder_convs.size(); ++l) {
      const std::string p = "encoder.conv" + std::to_string(l) + ".";
      f(p + "weight", net.encoder_convs[l].weight);
      f(p + "bias", net.encoder_convs[l].bias);
      f(p + "steer", net.encoder_convs[l].steer);
      f(p + "steer_bias", net.encoder_convs[l].steer_bias);
      if (l < net.encoder_norms.size()) {
        const std::string n = "encoder.norm" + std::to_string(l) + ".";
        f(n + "gamma", net.encoder_norms[l].gamma);
        f(n + "beta", net.encoder_norms[l].beta);
      }
    }
    f(std::string("encoder.head.weight"), net.encoder_head.weight);
    f(std::string("encoder.head.bias"), net.encoder_head.bias);
    f(std::string("generator.head.weight"), net.generator_head.weight);
    f(std::string("generator.head.bias"), net.generator_head.bias);
    for (std::size_t l = 0; l < net.generator_norms.size(); ++l) {
      const std::string n = "generator.norm" + std::to_string(l) + ".";
      f(n + "gamma", net.generator_norms[l].gamma);
      f(n + "beta", net.generator_norms[l].beta);
    }
    for (std::size_t l = 0; l < net.generator_convs.size(); ++l) {
      const std::string p = "generator.conv" + std::to_string(l) + ".";
      f(p + "weight", net.generator_convs[l].weight);
      f(p + "bias", net.generator_convs[l].bias);
      f(p + "steer", net.generator_convs[l].steer);
      f(p + "steer_bias", net.generator_convs[l].steer_bias);
    }
  }

  /// Same layout with every slot transformed by `f(name, const T&)`.
  template <typename U, typename F>
  Network<U> map(F&& f) const {
    Network<U> out;
    out.encoder_convs.resize(encoder_convs.size());
    out.encoder_norms.resize(encoder_norms.size());
    out.generator_norms.resize(generator_norms.size());
    out.generator_convs.resize(generator_convs.size());
    std::vector<U*> slots;
    Network<U>::visit(out, [&](const std::string&, U& slot) { slots.push_back(&slot); });
    std::size_t k = 0;
    visit(*this, [&](const std::string& name, const T& v) { *slots[k++] = f(name, v); });
    return out;
  }
};

using Weights = Network<Tensor>;
using WeightVars = Network<Var>;

struct RunningStats {
  Tensor mean;      // 1 x c
  Tensor variance;  // 1 x c
};

inline constexpr double kNormMomentum = 0.9;
inline constexpr double kNormEpsilon = 1e-5;

struct ModelParams {
  Architecture arch;
  std::string fingerprint;
  Weights weights;
  std::vector<RunningStats> encoder_stats;
  std::vector<RunningStats> generator_stats;

  /// Learnable tensors in canonical order.
  std::vector<std::pair<std::string, Tensor*>> parameters();
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;
  /// Normalization running statistics in canonical order.
  std::vector<std::pair<std::string, Tensor*>> buffers();
  std::vector<std::pair<std::string, const Tensor*>> buffers() const;
};

/// Zero-filled parameters with the shapes `arch` implies.
ModelParams allocate_model(const Architecture& arch, std::string fingerprint);

/// Glorot-initialized parameters bound to `topology`.
ModelParams init_model(const Architecture& arch, const Topology& topology, std::uint64_t seed);

/// Parameters plus the topology they are bound to.
class ShapeModel {
 public:
  ShapeModel(ModelParams params, TopologyPtr topology);

  const ModelParams& params() const { return params_; }
  ModelParams& mutable_params() { return params_; }
  const Topology& topology() const { return *topology_; }
  const TopologyPtr& topology_ptr() const { return topology_; }
  const FeastGraph& graph() const { return graph_; }
  int latent_size() const { return params_.arch.latent_size; }

 private:
  ModelParams params_;
  TopologyPtr topology_;
  FeastGraph graph_;
};

enum class BindScope { kAll, kEncoder, kGenerator };

/// Registers learnable tensors on `tape`, watched or constant. Tensors
/// outside `scope` are left as invalid handles.
WeightVars bind_weights(Tape& tape, const ModelParams& params, bool watch, BindScope scope = BindScope::kAll);

/// Forward passes on a tape. `features` stacks `batch` meshes (batch*N x 3);
/// `latent` is batch x L. With training = true, normalization uses batch
/// statistics and appends them to `stats` (if non-null).
struct EncoderOutputs {
  Var mean;          // batch x L
  Var log_variance;  // batch x L
};
EncoderOutputs encode_on_tape(const ModelParams& params, const WeightVars& w, const FeastGraph& graph,
                              Var features, int batch, bool training,
                              std::vector<ad::BatchNormStats>* stats = nullptr);
Var generate_on_tape(const ModelParams& params, const WeightVars& w, const FeastGraph& graph,
                     Var latent, bool training, std::vector<ad::BatchNormStats>* stats = nullptr);

/// Inference-mode encoder: (mean, log-variance).
std::pair<Eigen::VectorXd, Eigen::VectorXd> encode(const Mesh& mesh, const ShapeModel& model);
/// z = mean + exp(log_variance / 2) * eps, eps ~ N(0, I) from `seed`.
Eigen::VectorXd reparameterize(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_variance,
                               std::uint64_t seed);
/// Inference-mode generator.
Mesh generate(const Eigen::VectorXd& latent, const ShapeModel& model);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// gamma_i = s_i / mean(s), s_i = mean_{j in N_i} |x_i - x_j|^2 (1-ring).
/// Throws NumericError if mean(s) == 0.
Eigen::VectorXd density_weights(const Mesh& mesh);

/// (1/N) sum_i gamma_i |x'_i - x_i|^2.
double recon_loss(const Tensor& generated, const Tensor& target, const Eigen::VectorXd& gamma);
/// -1/2 sum_d (1 + lv_d - mu_d^2 - exp(lv_d)).
double kl_loss(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_variance);

namespace ad {
/// Density-weighted error averaged over all stacked rows, which equals the
/// mean of the per-mesh losses. `gamma` is a rows x 1 column.
Var recon_loss(Var generated, Var target, Var gamma);
/// Mean over the batch rows of the per-sample KL divergence.
Var kl_loss(Var mean, Var log_variance);
}  // namespace ad

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Random similarity applied to each sample every epoch.
struct OnlineAugmentation {
  bool enabled = true;
  /// Rotation angle bound in radians; pi or more samples the whole rotation
  /// group uniformly.
  double max_rotation = 3.141592653589793;
  double scale_min = 0.9;
  double scale_max = 1.1;
  /// Per-axis translation drawn from [-translation, translation].
  double translation = 0.1;
};

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 1e-3;
  double kl_weight = 1e-6;
  int batch_size = 20;
  int latent_size = 128;
  int heads = 8;
  std::vector<int> encoder_channels{16, 32};
  std::vector<int> generator_channels{32, 16};
  double leaky_slope = 0.02;
  bool batch_norm = true;
  std::uint64_t seed = 0;
  OnlineAugmentation online;
  /// Expands the dataset with `spectral_copies` augmented variants of each
  /// mesh before training.
  bool spectral_augmentation = false;
  int spectral_copies = 100;
  PerturbationSpec spectral;

  void validate() const;
  Architecture architecture(int vertex_count) const;
};

struct TrainLogEntry {
  int epoch = 0;
  double recon = 0.0;
  double kl = 0.0;
  double total = 0.0;
  double wall_time = 0.0;  // seconds since training start
};

struct TrainResult {
  ShapeModel model;
  std::vector<TrainLogEntry> log;
};

/// Applies the online augmentation to one sample.
Tensor random_similarity(const Tensor& vertices, const OnlineAugmentation& aug, std::uint64_t seed);

/// Minimizes recon + kl_weight * KL with Adam. Deterministic given the
/// config's seed. `on_epoch` (optional) observes each log entry.
TrainResult train(const std::vector<Mesh>& dataset, const TrainConfig& config,
                  const std::function<void(const TrainLogEntry&)>& on_epoch = {});

/// Mean inference-mode reconstruction loss of generate(encode-mean(X)).
double evaluate_reconstruction(const std::vector<Mesh>& meshes, const ShapeModel& model);

}  // namespace shapecomp
