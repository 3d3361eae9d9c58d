#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shapecomp/completion.hpp"
#include "shapecomp/spectral.hpp"

namespace shapecomp {

enum class Region { kFront, kRight, kLeft };

const char* region_name(Region region);
Region parse_region(const std::string& name);

/// Visible region of `mesh`: F = vertices with normal . view > 0;
/// R and L split F at the median x coordinate of F (strictly above and
/// strictly below). Throws ContractError naming the rule when empty.
SelectionMask region_mask(const Mesh& mesh, Region region, const Vec3& view = Vec3::UnitZ());

/// How test meshes are turned into intraoperative ground truths.
struct DeformationSpec {
  PerturbationSpec perturbation;
  Vec3 view = Vec3::UnitZ();
};

struct BenchmarkCase {
  std::string id;
  Mesh preop;
  Mesh ground_truth;
  Region region = Region::kFront;
  PointCloud cloud;
  SelectionMask mask;
  std::uint64_t seed = 0;
};

/// One case per (mesh, region). The deformation of case k uses
/// derive_seed(seed, k); P holds the ground-truth positions of the mask.
std::vector<BenchmarkCase> make_benchmark(const std::vector<Mesh>& meshes, const DeformationSpec& spec,
                                          std::uint64_t seed);

/// Writes manifest.json plus per-case OFF/XYZ/mask files into `dir`.
void save_benchmark(const std::vector<BenchmarkCase>& cases, const std::filesystem::path& dir);
std::vector<BenchmarkCase> load_benchmark(const std::filesystem::path& dir);

/// Closest-point distances in both directions, assigned to the vertices of
/// `predicted`, averaged per vertex and then over the closed 1-ring.
Eigen::VectorXd vertexwise_error(const Mesh& predicted, const Mesh& ground_truth);

struct RegionStats {
  double visible_mean = 0.0;
  double visible_max = 0.0;
  double invisible_mean = 0.0;
  double invisible_max = 0.0;
  int visible_count = 0;
  int invisible_count = 0;
};

/// Visible = mask vertices, invisible = the complement. Empty partitions
/// report zeros.
RegionStats region_report(const Eigen::VectorXd& distances, const SelectionMask& mask);

struct IcpConfig {
  int restarts = 16;
  int max_iterations = 200;
  double tolerance = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct IcpResult {
  Mat3 rotation = Mat3::Identity();  // maps source into target: R s + t
  Vec3 translation = Vec3::Zero();
  double error = 0.0;                // mean squared closest-point distance
  int best_restart = 0;
  std::vector<std::vector<double>> histories;  // per restart
};

/// Multi-start point-to-point ICP. Restart 0 starts from the identity,
/// the others from a uniformly random rotation about the source centroid.
IcpResult icp_baseline(const Tensor& source, const Tensor& target, const IcpConfig& config);

struct MethodReport {
  RegionStats stats;
  double seconds = 0.0;
};

struct CaseReport {
  std::string id;
  Region region = Region::kFront;
  MethodReport proposed;
  MethodReport baseline;
  double final_objective = 0.0;
  int vertex_wins_proposed = 0;
  int vertex_wins_baseline = 0;
  int vertex_ties = 0;
  Eigen::VectorXd proposed_error;
  Eigen::VectorXd baseline_error;
};

struct BenchmarkSummary {
  int cases = 0;
  int visible_wins = 0;  // cases with proposed visible mean <= baseline
  double proposed_visible_mean = 0.0;
  double baseline_visible_mean = 0.0;
  double proposed_invisible_mean = 0.0;
  double baseline_invisible_mean = 0.0;
  int vertex_wins_proposed = 0;
  int vertex_wins_baseline = 0;
  int vertex_ties = 0;
};

struct BenchmarkRun {
  std::vector<CaseReport> cases;
  BenchmarkSummary summary;
};

/// Completion (with refinement) versus the ICP baseline on every case.
/// Case k uses completion seed derive_seed(completion.seed, k).
BenchmarkRun run_benchmark(const ShapeModel& model, const std::vector<BenchmarkCase>& cases,
                           const CompletionConfig& completion, const IcpConfig& icp, int threads = 1);

/// Per-vertex errors closer than this count as ties in the win map.
inline constexpr double kTieTolerance = 1e-12;

std::string benchmark_report_json(const BenchmarkRun& run, bool include_timing = true);
/// Header: case,region,method,visible_mean,visible_max,invisible_mean,invisible_max,seconds
std::string benchmark_summary_csv(const BenchmarkRun& run, bool include_timing = true);

}  // namespace shapecomp
