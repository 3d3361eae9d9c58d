#pragma once

#include <array>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "shapecomp/mesh.hpp"

namespace shapecomp {

/// Fourier basis of one topology: eigenpairs of L = D - A, ascending.
struct SpectralBasis {
  std::string fingerprint;
  Eigen::VectorXd eigenvalues;
  Tensor eigenvectors;  // N x N, orthonormal columns
};

/// Dense un-normalized graph Laplacian. Throws StructureError if the
/// topology is disconnected.
Tensor graph_laplacian(const Topology& topology);

/// Eigendecomposition without any caching.
SpectralBasis compute_spectral_basis(const Topology& topology);

/// Thread-safe basis cache keyed by topology fingerprint. Concurrent
/// requests for a missing key compute the basis once.
class SpectralBasisCache {
 public:
  std::shared_ptr<const SpectralBasis> get(const Topology& topology);
  std::size_t size() const;
  void clear();

  /// Process-wide cache used by `spectral_basis`.
  static SpectralBasisCache& global();

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_future<std::shared_ptr<const SpectralBasis>>> entries_;
};

std::shared_ptr<const SpectralBasis> spectral_basis(const Topology& topology);

/// X^ = U^T X (N x 3).
Tensor fourier(const Mesh& mesh, const SpectralBasis& basis);
/// X = U X^ on the given topology.
Mesh inverse_fourier(const Tensor& coefficients, const SpectralBasis& basis, TopologyPtr topology);

/// Randomized perturbation of four frequencies. Index 0 (the DC term) is
/// never touched; one of indices 1..3 gets a low-frequency multiplier and
/// three distinct indices from [4, min(N-1, high_index_cap)] get
/// high-frequency multipliers.
struct PerturbationSpec {
  int low_index = -1;  // -1 draws uniformly from {1, 2, 3}
  double low_min = 0.7;
  double low_max = 1.3;
  double high_min = 0.5;
  double high_max = 1.5;
  int high_index_cap = 300;
  std::uint64_t seed = 0;
};

struct Perturbation {
  std::array<int, 4> indices{};  // [0] is the low-frequency index
  std::array<double, 4> multipliers{};
};

/// Throws ContractError on invalid ranges or if N < 7.
Perturbation draw_perturbation(const PerturbationSpec& spec, int vertex_count);
/// The multiplier vector xi: ones except at the four perturbed indices.
Eigen::VectorXd perturbation_vector(const Perturbation& p, int vertex_count);

/// X+ = U diag(xi) U^T X with xi drawn from `spec`.
Mesh spectral_augment(const Mesh& mesh, const SpectralBasis& basis, const PerturbationSpec& spec);
/// Same result, recomputing the basis from scratch.
Mesh spectral_augment_uncached(const Mesh& mesh, const PerturbationSpec& spec);

/// `count` independent augmentations of `base`; sample k uses
/// derive_seed(seed, k) in place of the template's seed.
std::vector<Mesh> synth_population(const Mesh& base, int count, const PerturbationSpec& spec_template,
                                   std::uint64_t seed);

}  // namespace shapecomp
