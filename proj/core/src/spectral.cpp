#include "shapecomp/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "shapecomp/errors.hpp"
#include "shapecomp/linalg.hpp"
#include "shapecomp/rng.hpp"

namespace shapecomp {

Tensor graph_laplacian(const Topology& topology) {
  if (!topology.is_connected()) {
    throw StructureError("graph Laplacian requires a connected topology");
  }
  const Index n = topology.vertex_count();
  Tensor l = Tensor::Zero(n, n);
  for (const Edge& e : topology.edges()) {
    l(e[0], e[1]) = -1.0;
    l(e[1], e[0]) = -1.0;
  }
  for (Index i = 0; i < n; ++i) l(i, i) = topology.degree(static_cast<int>(i));
  return l;
}

SpectralBasis compute_spectral_basis(const Topology& topology) {
  SymmetricEigen eig = symmetric_eig(graph_laplacian(topology));
  return SpectralBasis{topology.fingerprint(), std::move(eig.values), std::move(eig.vectors)};
}

std::shared_ptr<const SpectralBasis> SpectralBasisCache::get(const Topology& topology) {
  std::shared_future<std::shared_ptr<const SpectralBasis>> future;
  std::promise<std::shared_ptr<const SpectralBasis>> promise;
  bool owner = false;
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(topology.fingerprint());
    if (it != entries_.end()) {
      future = it->second;
    } else {
      future = promise.get_future().share();
      entries_.emplace(topology.fingerprint(), future);
      owner = true;
    }
  }
  if (owner) {
    try {
      promise.set_value(std::make_shared<const SpectralBasis>(compute_spectral_basis(topology)));
    } catch (...) {
      {
        std::lock_guard lock(mutex_);
        entries_.erase(topology.fingerprint());
      }
      promise.set_exception(std::current_exception());
    }
  }
  return future.get();
}

std::size_t SpectralBasisCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void SpectralBasisCache::clear() {
  std::lock_guard lock(mutex_);
  entries_.clear();
}

SpectralBasisCache& SpectralBasisCache::global() {
  static SpectralBasisCache cache;
  return cache;
}

std::shared_ptr<const SpectralBasis> spectral_basis(const Topology& topology) {
  return SpectralBasisCache::global().get(topology);
}

Tensor fourier(const Mesh& mesh, const SpectralBasis& basis) {
  require_same_topology(basis.fingerprint, mesh.fingerprint(), "fourier");
  return basis.eigenvectors.transpose() * mesh.vertices();
}

Mesh inverse_fourier(const Tensor& coefficients, const SpectralBasis& basis, TopologyPtr topology) {
  require_same_topology(basis.fingerprint, topology->fingerprint(), "inverse_fourier");
  if (coefficients.rows() != basis.eigenvectors.cols() || coefficients.cols() != 3) {
    throw ContractError("inverse_fourier: coefficient shape mismatch");
  }
  return Mesh(basis.eigenvectors * coefficients, std::move(topology));
}

Perturbation draw_perturbation(const PerturbationSpec& spec, int vertex_count) {
  if (!(spec.low_min > 0) || !(spec.low_max >= spec.low_min) || !(spec.high_min > 0) ||
      !(spec.high_max >= spec.high_min)) {
    throw ContractError("perturbation multiplier ranges must be positive and ordered");
  }
  if (spec.low_index != -1 && (spec.low_index < 1 || spec.low_index > 3)) {
    throw ContractError("low-frequency index must be 1, 2 or 3");
  }
  const int high_last = std::min(vertex_count - 1, spec.high_index_cap);
  if (high_last - 4 + 1 < 3) {
    throw ContractError("too few frequencies (N = " + std::to_string(vertex_count) +
                        ") for three high-frequency perturbations");
  }
  CounterRng rng(spec.seed);
  Perturbation p;
  p.indices[0] = spec.low_index == -1 ? 1 + static_cast<int>(rng.below(3)) : spec.low_index;
  p.multipliers[0] = rng.uniform(spec.low_min, spec.low_max);
  // Partial Fisher-Yates over [4, high_last] draws three without replacement.
  std::vector<int> pool;
  for (int k = 4; k <= high_last; ++k) pool.push_back(k);
  for (int j = 0; j < 3; ++j) {
    const std::size_t pick = j + static_cast<std::size_t>(rng.below(pool.size() - j));
    std::swap(pool[j], pool[pick]);
    p.indices[j + 1] = pool[j];
    p.multipliers[j + 1] = rng.uniform(spec.high_min, spec.high_max);
  }
  return p;
}

Eigen::VectorXd perturbation_vector(const Perturbation& p, int vertex_count) {
  Eigen::VectorXd xi = Eigen::VectorXd::Ones(vertex_count);
  for (int k = 0; k < 4; ++k) xi[p.indices[k]] = p.multipliers[k];
  return xi;
}

Mesh spectral_augment(const Mesh& mesh, const SpectralBasis& basis, const PerturbationSpec& spec) {
  Tensor coeffs = fourier(mesh, basis);
  const Eigen::VectorXd xi = perturbation_vector(draw_perturbation(spec, mesh.vertex_count()),
                                                 mesh.vertex_count());
  coeffs = (coeffs.array().colwise() * xi.array()).matrix();
  Tensor x = basis.eigenvectors * coeffs;
  if (!x.allFinite()) throw NumericError("spectral augmentation produced non-finite coordinates");
  return mesh.with_vertices(std::move(x));
}

Mesh spectral_augment_uncached(const Mesh& mesh, const PerturbationSpec& spec) {
  const SpectralBasis basis = compute_spectral_basis(mesh.topology());
  return spectral_augment(mesh, basis, spec);
}

std::vector<Mesh> synth_population(const Mesh& base, int count, const PerturbationSpec& spec_template,
                                   std::uint64_t seed) {
  if (count < 0) throw ContractError("population count must be non-negative");
  std::vector<Mesh> out;
  if (count == 0) return out;
  const auto basis = spectral_basis(base.topology());
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    PerturbationSpec spec = spec_template;
    spec.seed = derive_seed(seed, static_cast<std::uint64_t>(k));
    out.push_back(spectral_augment(base, *basis, spec));
  }
  return out;
}

}  // namespace shapecomp
