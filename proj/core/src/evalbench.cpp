#include "shapecomp/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "shapecomp/errors.hpp"
#include "shapecomp/linalg.hpp"
#include "shapecomp/mesh_io.hpp"
#include "shapecomp/parallel.hpp"
#include "shapecomp/rng.hpp"
#include "shapecomp/spatial.hpp"

namespace shapecomp {

const char* region_name(Region region) {
  switch (region) {
    case Region::kFront: return "F";
    case Region::kRight: return "R";
    case Region::kLeft: return "L";
  }
  return "?";
}

Region parse_region(const std::string& name) {
  if (name == "F") return Region::kFront;
  if (name == "R") return Region::kRight;
  if (name == "L") return Region::kLeft;
  throw ContractError("unknown region '" + name + "' (expected F, R or L)");
}

SelectionMask region_mask(const Mesh& mesh, Region region, const Vec3& view) {
  const Tensor normals = vertex_normals(mesh);
  std::vector<int> front;
  for (Index i = 0; i < normals.rows(); ++i) {
    if (normals.row(i).dot(view.transpose()) > 0.0) front.push_back(static_cast<int>(i));
  }
  SelectionMask mask;
  mask.provenance = std::string("region ") + region_name(region);
  if (region == Region::kFront) {
    mask.indices = front;
  } else if (!front.empty()) {
    std::vector<double> xs;
    for (int i : front) xs.push_back(mesh.vertices()(i, 0));
    std::sort(xs.begin(), xs.end());
    const std::size_t m = xs.size();
    const double median = m % 2 ? xs[m / 2] : 0.5 * (xs[m / 2 - 1] + xs[m / 2]);
    for (int i : front) {
      const double x = mesh.vertices()(i, 0);
      if ((region == Region::kRight && x > median) || (region == Region::kLeft && x < median)) {
        mask.indices.push_back(i);
      }
    }
  }
  if (mask.indices.empty()) {
    throw ContractError(std::string("region ") + region_name(region) +
                        " is empty (rule: normal . view > 0, split at the median x)");
  }
  return mask;
}

std::vector<BenchmarkCase> make_benchmark(const std::vector<Mesh>& meshes, const DeformationSpec& spec,
                                          std::uint64_t seed) {
  if (meshes.empty()) throw ContractError("make_benchmark: no meshes");
  const TopologyPtr topology = meshes.front().topology_ptr();
  for (const Mesh& m : meshes) require_same_topology(topology->fingerprint(), m.fingerprint(), "make_benchmark");
  const auto basis = spectral_basis(*topology);
  std::vector<BenchmarkCase> cases;
  const Region regions[] = {Region::kFront, Region::kRight, Region::kLeft};
  for (std::size_t a = 0; a < meshes.size(); ++a) {
    for (Region region : regions) {
      const std::uint64_t k = cases.size();
      PerturbationSpec p = spec.perturbation;
      p.seed = derive_seed(seed, k);
      Mesh gt = spectral_augment(meshes[a], *basis, p);
      SelectionMask mask = region_mask(meshes[a], region, spec.view);
      Tensor cloud(static_cast<Index>(mask.indices.size()), 3);
      for (std::size_t i = 0; i < mask.indices.size(); ++i) cloud.row(static_cast<Index>(i)) = gt.vertices().row(mask.indices[i]);
      std::string id = "mesh" + std::to_string(a) + "_" + region_name(region);
      cases.push_back({std::move(id), meshes[a], std::move(gt), region, PointCloud(std::move(cloud)), std::move(mask), p.seed});
    }
  }
  return cases;
}

void save_benchmark(const std::vector<BenchmarkCase>& cases, const std::filesystem::path& dir) {
  nlohmann::json list = nlohmann::json::array();
  for (const BenchmarkCase& c : cases) {
    const std::string preop = c.id + "_preop.off";
    const std::string gt = c.id + "_gt.off";
    const std::string cloud = c.id + "_cloud.xyz";
    const std::string mask = c.id + "_mask.json";
    save_mesh(c.preop, dir / preop);
    save_mesh(c.ground_truth, dir / gt);
    save_pointcloud(c.cloud, dir / cloud);
    save_mask(c.mask, c.preop.fingerprint(), dir / mask);
    list.push_back({{"id", c.id}, {"region", region_name(c.region)}, {"seed", c.seed}, {"preop", preop},
                    {"ground_truth", gt}, {"cloud", cloud}, {"mask", mask}});
  }
  nlohmann::json manifest = {{"cases", list},
                             {"regions", "F: normal . view > 0; R/L: F split at the median x of F"}};
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<BenchmarkCase> load_benchmark(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, (dir / "manifest.json").string() + ": " + e.what());
  }
  std::vector<BenchmarkCase> cases;
  try {
    for (const auto& e : manifest.at("cases")) {
      Mesh preop = load_mesh(dir / e.at("preop").get<std::string>());
      Mesh gt = load_mesh(dir / e.at("ground_truth").get<std::string>());
      require_same_topology(preop.fingerprint(), gt.fingerprint(), "benchmark ground truth");
      SelectionMask mask = load_mask(dir / e.at("mask").get<std::string>(), preop.fingerprint());
      mask.validate(static_cast<int>(preop.vertex_count()));
      PointCloud cloud = load_pointcloud(dir / e.at("cloud").get<std::string>());
      cases.push_back({e.at("id").get<std::string>(), std::move(preop), std::move(gt),
                       parse_region(e.at("region").get<std::string>()), std::move(cloud), std::move(mask),
                       e.at("seed").get<std::uint64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, (dir / "manifest.json").string() + ": " + e.what());
  }
  return cases;
}

Eigen::VectorXd vertexwise_error(const Mesh& predicted, const Mesh& ground_truth) {
  const Tensor& p = predicted.vertices();
  const Tensor& g = ground_truth.vertices();
  const KdTree gt_tree(g);
  const KdTree pred_tree(p);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p.rows());
  Eigen::VectorXd count = Eigen::VectorXd::Zero(p.rows());
  for (Index i = 0; i < p.rows(); ++i) {
    const auto hit = gt_tree.nearest(Vec3(p.row(i).transpose()));
    sum[i] += std::sqrt(hit.sq_distance);
    count[i] += 1.0;
  }
  for (Index j = 0; j < g.rows(); ++j) {
    const auto hit = pred_tree.nearest(Vec3(g.row(j).transpose()));
    sum[hit.index] += std::sqrt(hit.sq_distance);
    count[hit.index] += 1.0;
  }
  const Eigen::VectorXd per_vertex = sum.cwiseQuotient(count);
  const Topology& topo = predicted.topology();
  Eigen::VectorXd out(p.rows());
  for (Index i = 0; i < p.rows(); ++i) {
    const auto nbrs = topo.neighbors(static_cast<int>(i));
    double total = per_vertex[i];
    for (int j : nbrs) total += per_vertex[j];
    out[i] = total / static_cast<double>(nbrs.size() + 1);
  }
  return out;
}

RegionStats region_report(const Eigen::VectorXd& distances, const SelectionMask& mask) {
  mask.validate(static_cast<int>(distances.size()));
  std::vector<char> visible(distances.size(), 0);
  for (int i : mask.indices) visible[i] = 1;
  RegionStats s;
  double vsum = 0.0;
  double isum = 0.0;
  for (Index i = 0; i < distances.size(); ++i) {
    if (visible[i]) {
      vsum += distances[i];
      s.visible_max = std::max(s.visible_max, distances[i]);
      ++s.visible_count;
    } else {
      isum += distances[i];
      s.invisible_max = std::max(s.invisible_max, distances[i]);
      ++s.invisible_count;
    }
  }
  if (s.visible_count) s.visible_mean = vsum / s.visible_count;
  if (s.invisible_count) s.invisible_mean = isum / s.invisible_count;
  return s;
}

// ---------------------------------------------------------------------------

void IcpConfig::validate() const {
  if (restarts < 1) throw ConfigError("icp: restarts must be at least 1");
  if (max_iterations < 1) throw ConfigError("icp: max_iterations must be positive");
  if (!(tolerance >= 0.0)) throw ConfigError("icp: tolerance must be nonnegative");
}

namespace {

Mat3 random_rotation(CounterRng& rng) {
  Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  if (q.norm() == 0.0) return Mat3::Identity();
  q.normalize();
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

Tensor transform_rows(const Tensor& pts, const Mat3& rot, const Vec3& t) {
  Tensor out = pts * rot.transpose();
  out.rowwise() += t.transpose();
  return out;
}

}  // namespace

IcpResult icp_baseline(const Tensor& source, const Tensor& target, const IcpConfig& config) {
  config.validate();
  check_points(source, "icp source");
  check_points(target, "icp target");
  const KdTree tree(target);
  const Vec3 c = centroid(source);
  IcpResult best;
  best.error = std::numeric_limits<double>::infinity();
  Tensor matched(source.rows(), 3);
  for (int restart = 0; restart < config.restarts; ++restart) {
    Mat3 rot = Mat3::Identity();
    Vec3 t = Vec3::Zero();
    if (restart > 0) {
      CounterRng rng(derive_seed(config.seed, static_cast<std::uint64_t>(restart)));
      rot = random_rotation(rng);
      t = c - rot * c;
    }
    std::vector<double> history;
    auto assign = [&](const Mat3& r, const Vec3& tr) {
      const Tensor moved = transform_rows(source, r, tr);
      double err = 0.0;
      for (Index i = 0; i < moved.rows(); ++i) {
        const auto hit = tree.nearest(Vec3(moved.row(i).transpose()));
        matched.row(i) = target.row(hit.index);
        err += hit.sq_distance;
      }
      return err / static_cast<double>(moved.rows());
    };
    double err = assign(rot, t);
    history.push_back(err);
    for (int it = 0; it < config.max_iterations && err > 0.0; ++it) {
      const RigidFit fit = fit_rigid(source, matched);
      const double next = assign(fit.rotation, fit.translation);
      if (next > err) break;  // guards against round-off
      const double improvement = (err - next) / err;
      rot = fit.rotation;
      t = fit.translation;
      err = next;
      history.push_back(err);
      if (improvement < config.tolerance) break;
    }
    if (err < best.error) {
      best.error = err;
      best.rotation = rot;
      best.translation = t;
      best.best_restart = restart;
    }
    best.histories.push_back(std::move(history));
  }
  return best;
}

// ---------------------------------------------------------------------------

BenchmarkRun run_benchmark(const ShapeModel& model, const std::vector<BenchmarkCase>& cases,
                           const CompletionConfig& completion, const IcpConfig& icp, int threads) {
  completion.validate();
  icp.validate();
  std::vector<std::optional<CaseReport>> slots(cases.size());
  parallel_for(cases.size(), threads, [&](std::size_t k) {
    const BenchmarkCase& c = cases[k];
    require_same_topology(model.params().fingerprint, c.preop.fingerprint(), "benchmark case");
    CaseReport r;
    r.id = c.id;
    r.region = c.region;

    CompletionConfig cc = completion;
    cc.seed = derive_seed(completion.seed, k);
    cc.threads = 1;
    auto t0 = std::chrono::steady_clock::now();
    const CompletionResult res = complete(c.preop, c.cloud, c.mask, model, cc);
    r.proposed.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.final_objective = res.final_objective;
    r.proposed_error = vertexwise_error(res.mesh, c.ground_truth);
    r.proposed.stats = region_report(r.proposed_error, c.mask);

    IcpConfig ic = icp;
    ic.seed = derive_seed(icp.seed, k);
    t0 = std::chrono::steady_clock::now();
    const IcpResult fit = icp_baseline(c.cloud.points(), c.preop.vertices(), ic);
    // The fit maps the cloud onto the preoperative mesh; its inverse carries
    // the preoperative mesh into the observation frame.
    Tensor moved = c.preop.vertices();
    moved.rowwise() -= fit.translation.transpose();
    moved = moved * fit.rotation;
    r.baseline.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.baseline_error = vertexwise_error(c.preop.with_vertices(std::move(moved)), c.ground_truth);
    r.baseline.stats = region_report(r.baseline_error, c.mask);

    for (Index i = 0; i < r.proposed_error.size(); ++i) {
      const double d = r.proposed_error[i] - r.baseline_error[i];
      if (std::abs(d) <= kTieTolerance) {
        ++r.vertex_ties;
      } else if (d < 0.0) {
        ++r.vertex_wins_proposed;
      } else {
        ++r.vertex_wins_baseline;
      }
    }
    slots[k] = std::move(r);
  });

  BenchmarkRun run;
  for (auto& s : slots) run.cases.push_back(std::move(*s));
  BenchmarkSummary& sum = run.summary;
  sum.cases = static_cast<int>(run.cases.size());
  for (const CaseReport& r : run.cases) {
    if (r.proposed.stats.visible_mean <= r.baseline.stats.visible_mean) ++sum.visible_wins;
    sum.proposed_visible_mean += r.proposed.stats.visible_mean;
    sum.baseline_visible_mean += r.baseline.stats.visible_mean;
    sum.proposed_invisible_mean += r.proposed.stats.invisible_mean;
    sum.baseline_invisible_mean += r.baseline.stats.invisible_mean;
    sum.vertex_wins_proposed += r.vertex_wins_proposed;
    sum.vertex_wins_baseline += r.vertex_wins_baseline;
    sum.vertex_ties += r.vertex_ties;
  }
  if (sum.cases > 0) {
    sum.proposed_visible_mean /= sum.cases;
    sum.baseline_visible_mean /= sum.cases;
    sum.proposed_invisible_mean /= sum.cases;
    sum.baseline_invisible_mean /= sum.cases;
  }
  return run;
}

namespace {

nlohmann::json stats_json(const MethodReport& m, bool timing) {
  nlohmann::json j = {{"visible_mean", m.stats.visible_mean},     {"visible_max", m.stats.visible_max},
                      {"invisible_mean", m.stats.invisible_mean}, {"invisible_max", m.stats.invisible_max},
                      {"visible_count", m.stats.visible_count},   {"invisible_count", m.stats.invisible_count}};
  j["seconds"] = timing ? m.seconds : 0.0;
  return j;
}

}  // namespace

std::string benchmark_report_json(const BenchmarkRun& run, bool include_timing) {
  nlohmann::json cases = nlohmann::json::array();
  for (const CaseReport& r : run.cases) {
    cases.push_back({{"id", r.id},
                     {"region", region_name(r.region)},
                     {"proposed", stats_json(r.proposed, include_timing)},
                     {"baseline", stats_json(r.baseline, include_timing)},
                     {"final_objective", r.final_objective},
                     {"vertex_wins", {{"proposed", r.vertex_wins_proposed},
                                      {"baseline", r.vertex_wins_baseline},
                                      {"ties", r.vertex_ties}}}});
  }
  const BenchmarkSummary& s = run.summary;
  nlohmann::json j = {
      {"methods", {{"proposed", "latent completion"}, {"baseline", "ICP (multi-start)"}}},
      {"cases", cases},
      {"summary",
       {{"cases", s.cases},
        {"visible_wins", s.visible_wins},
        {"proposed_visible_mean", s.proposed_visible_mean},
        {"baseline_visible_mean", s.baseline_visible_mean},
        {"proposed_invisible_mean", s.proposed_invisible_mean},
        {"baseline_invisible_mean", s.baseline_invisible_mean},
        {"vertex_wins", {{"proposed", s.vertex_wins_proposed}, {"baseline", s.vertex_wins_baseline}, {"ties", s.vertex_ties}}}}}};
  return j.dump(2) + "\n";
}

std::string benchmark_summary_csv(const BenchmarkRun& run, bool include_timing) {
  std::ostringstream out;
  out << "case,region,method,visible_mean,visible_max,invisible_mean,invisible_max,seconds\n";
  auto line = [&](const CaseReport& r, const char* method, const MethodReport& m) {
    out << r.id << ',' << region_name(r.region) << ',' << method << ',' << format_double(m.stats.visible_mean) << ','
        << format_double(m.stats.visible_max) << ',' << format_double(m.stats.invisible_mean) << ','
        << format_double(m.stats.invisible_max) << ',' << format_double(include_timing ? m.seconds : 0.0) << '\n';
  };
  for (const CaseReport& r : run.cases) {
    line(r, "proposed", r.proposed);
    line(r, "icp_multistart", r.baseline);
  }
  return out.str();
}

}  // namespace shapecomp
