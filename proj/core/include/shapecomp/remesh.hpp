#pragma once

#include <cstdint>
#include <vector>

#include "shapecomp/geometry_losses.hpp"
#include "shapecomp/mesh.hpp"

namespace shapecomp {

/// Weights and schedule of the template-fitting objective
///   w_chamfer*L_Ch + w_normal*L_n + w_laplacian*L_L + w_edge*L_E.
struct RemeshConfig {
  int iterations = 500;
  double learning_rate = 5e-3;
  double w_chamfer = 5.0;
  double w_normal = 0.2;
  double w_laplacian = 0.3;
  double w_edge = 15.0;
  int template_level = 4;
  ChamferMetric chamfer_metric = ChamferMetric::kEuclidean;
  /// Recorded for provenance; the procedure itself is deterministic.
  std::uint64_t seed = 0;

  void validate() const;
};

struct RemeshLogEntry {
  int step = 0;
  double chamfer = 0.0;
  double normal = 0.0;
  double laplacian = 0.0;
  double edge = 0.0;
  double total = 0.0;
};

struct RemeshResult {
  Mesh mesh;
  /// Losses at every evaluated iterate: entry k is the state after k Adam
  /// steps, so the log has iterations + 1 entries.
  std::vector<RemeshLogEntry> log;
  int best_step = 0;
};

/// Icosphere of `level` scaled to the bounding-sphere radius of `target`
/// (about its centroid) and centered on that centroid.
Mesh remesh_template(const Mesh& target, int level);

/// Deforms the template toward `target` with Adam and returns the iterate
/// with the lowest total loss. The output always carries the template's
/// topology. Throws DivergenceError on a non-finite loss.
RemeshResult remesh(const Mesh& target, const RemeshConfig& config);

/// Same optimization from an explicit starting mesh.
RemeshResult remesh_from(const Mesh& start, const Mesh& target, const RemeshConfig& config);

}  // namespace shapecomp
