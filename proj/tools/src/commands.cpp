#include "commands.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

#include "config.hpp"
#include "shapecomp/checkpoint.hpp"
#include "shapecomp/errors.hpp"
#include "shapecomp/gradient_suite.hpp"
#include "shapecomp/mesh_io.hpp"

namespace shapecomp::cli {
namespace {

namespace fs = std::filesystem;

void require_input(const fs::path& p, const char* flag) {
  if (p.empty()) throw IoError(std::string("missing required input ") + flag);
  if (!fs::exists(p)) throw IoError(std::string("input for ") + flag + " does not exist: " + p.string());
}

void require_output(const fs::path& p, const char* flag) {
  if (p.empty()) throw IoError(std::string("missing required output ") + flag);
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p += suffix;
  return p;
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json vec3_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

std::uint64_t seed_of(const json& config) {
  try {
    return config.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key 'seed': ") + e.what());
  }
}

std::vector<Mesh> load_dataset(const fs::path& manifest_path) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    throw ParseError(0, manifest_path.string() + ": " + e.what());
  }
  if (!manifest.contains("meshes") || !manifest["meshes"].is_array()) {
    throw ParseError(0, manifest_path.string() + ": expected a \"meshes\" array");
  }
  std::vector<Mesh> meshes;
  for (const auto& entry : manifest["meshes"]) {
    meshes.push_back(load_mesh(manifest_path.parent_path() / entry.get<std::string>()));
  }
  if (meshes.empty()) throw ContractError(manifest_path.string() + ": dataset is empty");
  return meshes;
}

json transform_json(const RigidTransform& t) {
  return {{"rotation_axis_angle", vec3_json(t.rotation)},
          {"translation", vec3_json(t.translation)},
          {"cloud_centroid", vec3_json(t.cloud_centroid)},
          {"anchor", vec3_json(t.anchor)}};
}

}  // namespace

int run_icosphere(const Args& a) {
  require_output(a.out, "--out");
  json config = resolve_config("icosphere", a.config, a.overrides);
  if (a.level) config["level"] = *a.level;
  const int level = config.at("level").get<int>();
  const double radius = config.at("radius").get<double>();
  if (!(radius > 0.0)) throw ConfigError("radius must be positive");
  Mesh m = icosphere(level);
  m = m.with_vertices(m.vertices() * radius);
  save_mesh(m, a.out);
  write_json(sibling(a.out, ".config.json"), config);
  if (a.verbose) std::cerr << "icosphere level " << level << ": " << m.vertex_count() << " vertices\n";
  return 0;
}

int run_remesh(const Args& a) {
  require_input(a.target, "--target");
  require_output(a.out, "--out");
  const json config = resolve_config("remesh", a.config, a.overrides);
  const RemeshConfig rc = remesh_config(config.at("remesh"), seed_of(config));
  const Mesh target = load_mesh(a.target);
  const RemeshResult r = remesh(target, rc);
  save_mesh(r.mesh, a.out);
  std::string log;
  for (const RemeshLogEntry& e : r.log) {
    log += json{{"step", e.step}, {"chamfer", e.chamfer}, {"normal", e.normal}, {"laplacian", e.laplacian},
                {"edge", e.edge}, {"total", e.total}}
               .dump() +
           "\n";
  }
  write_text_atomic(sibling(a.out, ".log.jsonl"), log);
  write_json(sibling(a.out, ".config.json"), config);
  if (a.verbose) {
    std::cerr << "remesh: best step " << r.best_step << ", chamfer " << r.log[r.best_step].chamfer << "\n";
  }
  return 0;
}

int run_synth_data(const Args& a) {
  require_input(a.base, "--base");
  require_output(a.out_dir, "--out-dir");
  json config = resolve_config("synth-data", a.config, a.overrides);
  if (a.count) config["count"] = *a.count;
  if (a.seed) config["seed"] = *a.seed;
  const int count = config.at("count").get<int>();
  if (count < 1) throw ConfigError("count must be positive");
  const std::uint64_t seed = seed_of(config);
  const Mesh base = load_mesh(a.base);
  const PerturbationSpec spec = perturbation_spec(config.at("perturbation"), seed);
  const std::vector<Mesh> population = synth_population(base, count, spec, seed);
  json names = json::array();
  for (std::size_t k = 0; k < population.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "mesh_%03zu.off", k);
    save_mesh(population[k], a.out_dir / name);
    names.push_back(name);
  }
  write_json(a.out_dir / "manifest.json", {{"topology_fingerprint", base.fingerprint()}, {"meshes", names}});
  write_json(a.out_dir / "config.json", config);
  return 0;
}

int run_augment(const Args& a) {
  require_input(a.in, "--in");
  require_output(a.out, "--out");
  std::optional<fs::path> spec_file = a.config;
  if (!a.spec.empty()) {
    require_input(a.spec, "--spec");
    spec_file = a.spec;
  }
  const json config = resolve_config("augment", spec_file, a.overrides);
  const PerturbationSpec spec = perturbation_spec(config, seed_of(config));
  const Mesh mesh = load_mesh(a.in);
  const Mesh out = spectral_augment(mesh, *spectral_basis(mesh.topology()), spec);
  save_mesh(out, a.out);
  write_json(sibling(a.out, ".config.json"), config);
  return 0;
}

int run_train(const Args& a) {
  require_input(a.dataset_manifest, "--dataset-manifest");
  const fs::path out_dir = !a.out_dir.empty() ? a.out_dir : a.out;
  require_output(out_dir, "--out");
  const json config = resolve_config("train", a.config, a.overrides);
  const TrainConfig tc = train_config(config.at("train"), seed_of(config));
  const bool timing = config.at("report_timing").get<bool>();
  const std::vector<Mesh> dataset = load_dataset(a.dataset_manifest);
  const bool verbose = a.verbose;
  const TrainResult r = train(dataset, tc, [verbose](const TrainLogEntry& e) {
    if (verbose) std::cerr << "epoch " << e.epoch << " recon " << e.recon << " kl " << e.kl << "\n";
  });
  save_model(r.model.params(), out_dir / "model.json");
  std::string log;
  for (const TrainLogEntry& e : r.log) {
    log += json{{"epoch", e.epoch}, {"recon", e.recon}, {"kl", e.kl}, {"total", e.total},
                {"wall_time", timing ? e.wall_time : 0.0}}
               .dump() +
           "\n";
  }
  write_text_atomic(out_dir / "train_log.jsonl", log);
  write_json(out_dir / "config.json", config);
  return 0;
}

int run_encode(const Args& a) {
  require_input(a.mesh, "--mesh");
  require_input(a.model, "--model");
  const Mesh mesh = load_mesh(a.mesh);
  const ShapeModel model = load_model(a.model, mesh.topology_ptr());
  const auto [mean, log_variance] = encode(mesh, model);
  const json out = {{"mean", vector_json(mean)}, {"log_variance", vector_json(log_variance)}};
  if (!a.out.empty()) {
    write_json(a.out, out);
  } else {
    std::cout << out.dump(2) << "\n";
  }
  return 0;
}

int run_complete(const Args& a) {
  require_input(a.preop, "--preop");
  require_input(a.cloud, "--cloud");
  require_input(a.mask, "--mask");
  require_input(a.model, "--model");
  require_output(a.out_dir, "--out-dir");
  json config = resolve_config("complete", a.config, a.overrides);
  if (a.hypotheses) config["completion"]["hypotheses"] = *a.hypotheses;
  CompletionConfig cc = completion_config(config.at("completion"), seed_of(config));
  cc.threads = a.threads;

  const Mesh preop = load_mesh(a.preop);
  const PointCloud cloud = load_pointcloud(a.cloud);
  const SelectionMask mask = load_mask(a.mask, preop.fingerprint());
  const ShapeModel model = load_model(a.model, preop.topology_ptr());

  Eigen::VectorXd z_init;
  json init_report;
  if (!config.at("initial_latent").is_null()) {
    const auto values = config.at("initial_latent").get<std::vector<double>>();
    if (static_cast<int>(values.size()) != model.latent_size()) {
      throw ConfigError("initial_latent has " + std::to_string(values.size()) + " entries, model latent size is " +
                        std::to_string(model.latent_size()));
    }
    z_init = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
    init_report = {{"source", "config"}};
  } else {
    const InitResult init = initialize(preop, model, cc);
    z_init = init.latent;
    init_report = {{"source", cc.refine ? "encoder_refined" : "encoder"},
                   {"refinement_history", init.history},
                   {"best_iteration", init.best_iteration}};
  }
  const std::vector<int> selection = sample_selection(preop, mask, cc);
  std::vector<CompletionResult> results;
  if (cc.hypotheses == 1) {
    results.push_back(complete_from_latent(z_init, selection, cloud, model, cc));
  } else {
    results = multi_hypothesis_from_latent(z_init, selection, cloud, model, cc);
  }

  json hypotheses = json::array();
  for (std::size_t k = 0; k < results.size(); ++k) {
    const CompletionResult& r = results[k];
    const std::string name = results.size() == 1 ? "completed.off" : "completed_" + std::to_string(k) + ".off";
    save_mesh(r.mesh, a.out_dir / name);
    hypotheses.push_back({{"output_mesh", name},
                          {"initial_objective", r.initial_objective},
                          {"final_objective", r.final_objective},
                          {"best_iteration", r.best_iteration},
                          {"iterations", static_cast<int>(r.history.size()) - 1},
                          {"transform", transform_json(r.transform)},
                          {"latent", vector_json(r.latent)},
                          {"objective_history", r.history}});
  }
  const json report = {{"config", config},
                       {"initialization", init_report},
                       {"selection_size", selection.size()},
                       {"hypotheses", hypotheses}};
  write_json(a.out_dir / "report.json", report);
  write_json(a.out_dir / "config.json", config);
  if (a.verbose) {
    for (const CompletionResult& r : results) std::cerr << "objective " << r.initial_objective << " -> " << r.final_objective << "\n";
  }
  return 0;
}

int run_benchmark_command(const Args& a) {
  require_input(a.model, "--model");
  require_input(a.cases, "--cases");
  require_output(a.out_dir, "--out-dir");
  const json config = resolve_config("benchmark", a.config, a.overrides);
  const std::uint64_t seed = seed_of(config);
  CompletionConfig cc = completion_config(config.at("completion"), seed);
  const IcpConfig ic = icp_config(config.at("icp"), seed);
  const bool timing = config.at("report_timing").get<bool>();

  const fs::path manifest_path = fs::is_directory(a.cases) ? a.cases / "manifest.json" : a.cases;
  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    throw ParseError(0, manifest_path.string() + ": " + e.what());
  }
  std::vector<BenchmarkCase> cases;
  if (manifest.contains("cases")) {
    cases = load_benchmark(manifest_path.parent_path());
  } else {
    // A dataset manifest: generate the cases from its meshes.
    cases = make_benchmark(load_dataset(manifest_path), deformation_spec(config.at("deformation")), seed);
    save_benchmark(cases, a.out_dir / "cases");
  }
  if (cases.empty()) throw ContractError("benchmark has no cases");
  const ShapeModel model = load_model(a.model, cases.front().preop.topology_ptr());
  const BenchmarkRun run = run_benchmark(model, cases, cc, ic, a.threads);
  write_text_atomic(a.out_dir / "report.json", benchmark_report_json(run, timing));
  write_text_atomic(a.out_dir / "summary.csv", benchmark_summary_csv(run, timing));
  write_json(a.out_dir / "config.json", config);
  if (a.verbose) {
    std::cerr << "visible-region wins " << run.summary.visible_wins << "/" << run.summary.cases << "\n";
  }
  return 0;
}

int run_gradcheck(const Args& a) {
  const std::vector<GradientCheck> checks = run_gradient_suite(a.component);
  bool ok = true;
  for (const GradientCheck& c : checks) {
    char line[160];
    std::snprintf(line, sizeof line, "%-22s max_rel_err %.3e  tol %.0e  %s", c.component.c_str(),
                  c.max_relative_error, c.tolerance, c.passed ? "PASS" : "FAIL");
    std::cout << line << "\n";
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace shapecomp::cli
