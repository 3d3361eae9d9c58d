#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shapecomp/gcvae.hpp"
#include "shapecomp/geometry_losses.hpp"

namespace shapecomp {

/// Ordered vertex indices into a shared topology.
struct SelectionMask {
  std::vector<int> indices;
  std::string provenance;

  /// Throws ContractError unless non-empty, unique and in [0, vertex_count).
  void validate(int vertex_count) const;
};

/// JSON {topology_fingerprint, indices, provenance}.
void save_mask(const SelectionMask& mask, const std::string& fingerprint, const std::filesystem::path& path);
/// Throws TopologyError if the stored fingerprint differs from `fingerprint`.
SelectionMask load_mask(const std::filesystem::path& path, const std::string& fingerprint);

/// Vertices whose normal has positive dot product with `view`.
SelectionMask view_mask(const Mesh& mesh, const Vec3& view);

/// Greedy max-min sampling of `k` rows of `points` among `candidates`,
/// starting from candidates[start]. Ties go to the lowest vertex index.
SelectionMask farthest_point_sample(const Tensor& points, std::span<const int> candidates, int k, int start);
/// Same, with the start drawn uniformly from the candidates by `seed`.
SelectionMask farthest_point_sample_seeded(const Tensor& points, std::span<const int> candidates, int k,
                                           std::uint64_t seed);

/// Rows of `mesh` in mask order.
Tensor apply_selection(const Mesh& mesh, const SelectionMask& mask);

/// Rodrigues map of an axis-angle vector (angle = norm, radians).
Mat3 rotation_from_axis_angle(const Vec3& r);

namespace ad {
/// 3x3 rotation from a 1x3 or 3x1 axis-angle var.
Var rodrigues(Var r);
}

struct CompletionConfig {
  int iterations = 100;
  double lr_z = 5e-2;
  double lr_rotation = 1e-2;
  double lr_translation = 5e-5;
  bool refine = true;
  int refine_iterations = 20;
  double refine_lr = 5e-2;
  int hypotheses = 1;
  double noise_variance = 0.1;
  /// Cap on farthest-point samples drawn from the mask.
  int fps_samples = 200;
  ChamferMetric metric = ChamferMetric::kEuclidean;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

/// Maps the cloud into model space: y = R (p - cloud_centroid) + anchor + t.
struct RigidTransform {
  Vec3 rotation = Vec3::Zero();  // axis-angle
  Vec3 translation = Vec3::Zero();
  Vec3 cloud_centroid = Vec3::Zero();
  Vec3 anchor = Vec3::Zero();  // centroid of the initial generated selection

  Mat3 matrix() const { return rotation_from_axis_angle(rotation); }
  /// Inverse map of model-space rows into the observation frame.
  Tensor to_observation(const Tensor& model_points) const;
  Tensor to_model(const Tensor& observed_points) const;
};

/// Fixed data of one Eq.-style fit: model, sampled selection and the
/// centered cloud.
class CompletionProblem {
 public:
  /// Centers `cloud` and anchors it at the centroid of the selection of
  /// G(initial_latent).
  CompletionProblem(const ShapeModel& model, std::vector<int> selection, const Tensor& cloud,
                    const Eigen::VectorXd& initial_latent, ChamferMetric metric);

  double objective(const Eigen::VectorXd& z, const Vec3& r, const Vec3& t) const;
  /// z is 1 x L, r and t are 1 x 3; `w` must include the generator.
  Var objective(Tape& tape, const WeightVars& w, Var z, Var r, Var t) const;

  const ShapeModel& model() const { return *model_; }
  const std::vector<int>& selection() const { return selection_; }
  const Vec3& cloud_centroid() const { return cloud_centroid_; }
  const Vec3& anchor() const { return anchor_; }

 private:
  const ShapeModel* model_;
  std::vector<int> selection_;
  Tensor centered_cloud_;
  Vec3 cloud_centroid_;
  Vec3 anchor_;
  ChamferMetric metric_;
};

struct InitResult {
  Eigen::VectorXd encoded;  // z0
  Eigen::VectorXd latent;   // z0* (equals z0 without refinement)
  std::vector<double> history;  // max-vertex objective per evaluated iterate
  int best_iteration = 0;
};

/// Encoder mean of `preop`, optionally refined on max_i |x_i - G(z)_i|^2.
InitResult initialize(const Mesh& preop, const ShapeModel& model, const CompletionConfig& config);

struct CompletionResult {
  Mesh mesh;        // observation frame
  Mesh model_mesh;  // model frame, G(z*)
  Eigen::VectorXd latent;
  Eigen::VectorXd initial_latent;
  RigidTransform transform;
  std::vector<int> selection;
  std::vector<double> history;  // objective at iterates 0..iterations
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int best_iteration = 0;
};

/// Runs the joint (z, r, t) optimization from `initial_latent` against the
/// sampled `selection`. Returns the best iterate.
CompletionResult complete_from_latent(const Eigen::VectorXd& initial_latent, const std::vector<int>& selection,
                                      const PointCloud& cloud, const ShapeModel& model,
                                      const CompletionConfig& config);

/// Full pipeline: initialize from `preop`, farthest-point sample the mask,
/// optimize.
CompletionResult complete(const Mesh& preop, const PointCloud& cloud, const SelectionMask& mask,
                          const ShapeModel& model, const CompletionConfig& config);

/// config.hypotheses runs from z_init + eta_k, eta_k ~ N(0, noise_variance I)
/// drawn from derive_seed(config.seed, k + 1).
std::vector<CompletionResult> multi_hypothesis_from_latent(const Eigen::VectorXd& initial_latent,
                                                           const std::vector<int>& selection,
                                                           const PointCloud& cloud, const ShapeModel& model,
                                                           const CompletionConfig& config);
std::vector<CompletionResult> multi_hypothesis(const Mesh& preop, const PointCloud& cloud,
                                               const SelectionMask& mask, const ShapeModel& model,
                                               const CompletionConfig& config);

/// Farthest-point subsample of the mask on `preop` used by `complete`.
std::vector<int> sample_selection(const Mesh& preop, const SelectionMask& mask, const CompletionConfig& config);

}  // namespace shapecomp
