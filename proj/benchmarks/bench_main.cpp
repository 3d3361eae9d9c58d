#include <benchmark/benchmark.h>

#include "shapecomp/gcvae.hpp"
#include "shapecomp/geometry_losses.hpp"
#include "shapecomp/mesh.hpp"
#include "shapecomp/rng.hpp"
#include "shapecomp/spectral.hpp"

using namespace shapecomp;

namespace {

Tensor noise(Index rows, Index cols, CounterRng& rng) {
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal() * 0.1;
  return t;
}

// Basis recomputed per call: one dense eigendecomposition of the Laplacian.
void BM_AugmentUncached(benchmark::State& state) {
  const Mesh mesh = icosphere(static_cast<int>(state.range(0)));
  PerturbationSpec spec;
  for (auto _ : state) {
    ++spec.seed;
    benchmark::DoNotOptimize(spectral_augment_uncached(mesh, spec));
  }
  state.SetLabel("N=" + std::to_string(mesh.vertex_count()));
}
BENCHMARK(BM_AugmentUncached)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_AugmentCached(benchmark::State& state) {
  const Mesh mesh = icosphere(static_cast<int>(state.range(0)));
  const auto basis = spectral_basis(mesh.topology());
  PerturbationSpec spec;
  for (auto _ : state) {
    ++spec.seed;
    benchmark::DoNotOptimize(spectral_augment(mesh, *basis, spec));
  }
  state.SetLabel("N=" + std::to_string(mesh.vertex_count()));
}
BENCHMARK(BM_AugmentCached)->Arg(2)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_FeastConv(benchmark::State& state) {
  const Mesh mesh = icosphere(static_cast<int>(state.range(0)));
  const FeastGraph graph = FeastGraph::from_topology(mesh.topology());
  CounterRng rng(1);
  const int in = 16, out = 32, heads = 8;
  const FeastLayerParams layer{noise(in, heads * out, rng), noise(1, out, rng), noise(in, heads, rng),
                               noise(1, heads, rng)};
  const Tensor x = noise(mesh.vertex_count(), in, rng);
  for (auto _ : state) benchmark::DoNotOptimize(feast_conv(x, graph, layer));
}
BENCHMARK(BM_FeastConv)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_Chamfer(benchmark::State& state) {
  const Mesh mesh = icosphere(static_cast<int>(state.range(0)));
  CounterRng rng(2);
  const Tensor other = mesh.vertices() + noise(mesh.vertex_count(), 3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer_loss(mesh.vertices(), other));
}
BENCHMARK(BM_Chamfer)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
