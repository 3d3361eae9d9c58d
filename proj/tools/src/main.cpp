#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "shapecomp/errors.hpp"

namespace {

void print_error(const std::string& kind, const std::string& message) {
  const nlohmann::json j = {{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  using shapecomp::cli::Args;
  Args args;
  CLI::App app{"shapecomp: mesh remeshing, spectral augmentation, VAE training and latent shape completion"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", args.config, "JSON configuration file");
  app.add_option("--set", args.overrides, "Override a config value, e.g. --set train.lr=1e-3")->take_all();
  app.add_option("--threads", args.threads, "Maximum worker threads")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", args.verbose, "Progress on stderr");

  auto* ico = app.add_subcommand("icosphere", "Write a subdivided unit icosphere");
  ico->add_option("--level", args.level, "Subdivision level")->check(CLI::Range(0, 6));
  ico->add_option("--out", args.out, "Output OFF file")->required();

  auto* rem = app.add_subcommand("remesh", "Fit the template icosphere to a target mesh");
  rem->add_option("--target", args.target, "Target OFF mesh")->required();
  rem->add_option("--out", args.out, "Output OFF file")->required();

  auto* syn = app.add_subcommand("synth-data", "Spectrally augmented population of a base mesh");
  syn->add_option("--base", args.base, "Base OFF mesh")->required();
  syn->add_option("--count", args.count, "Number of meshes");
  syn->add_option("--seed", args.seed, "Root seed");
  syn->add_option("--out-dir", args.out_dir, "Output directory")->required();

  auto* aug = app.add_subcommand("augment", "Apply one spectral perturbation to a mesh");
  aug->add_option("--in", args.in, "Input OFF mesh")->required();
  aug->add_option("--spec", args.spec, "Perturbation spec JSON");
  aug->add_option("--out", args.out, "Output OFF file")->required();

  auto* trn = app.add_subcommand("train", "Train the graph-convolutional VAE");
  trn->add_option("--dataset-manifest", args.dataset_manifest, "Dataset manifest JSON")->required();
  trn->add_option("--out,--out-dir", args.out_dir, "Output directory")->required();

  auto* enc = app.add_subcommand("encode", "Encoder mean and log-variance of a mesh");
  enc->add_option("--mesh", args.mesh, "Input OFF mesh")->required();
  enc->add_option("--model", args.model, "Model manifest JSON")->required();
  enc->add_option("--out", args.out, "Write the JSON here instead of stdout");

  auto* cmp = app.add_subcommand("complete", "Complete a partial point cloud");
  cmp->add_option("--preop", args.preop, "Preoperative OFF mesh")->required();
  cmp->add_option("--cloud", args.cloud, "Partial point cloud (XYZ)")->required();
  cmp->add_option("--mask", args.mask, "Selection mask JSON")->required();
  cmp->add_option("--model", args.model, "Model manifest JSON")->required();
  cmp->add_option("--out-dir", args.out_dir, "Output directory")->required();
  cmp->add_option("--hypotheses", args.hypotheses, "Number of hypotheses")->check(CLI::PositiveNumber);

  auto* ben = app.add_subcommand("benchmark", "Completion versus multi-start ICP on synthetic cases");
  ben->add_option("--model", args.model, "Model manifest JSON")->required();
  ben->add_option("--cases", args.cases, "Case manifest, or a dataset manifest to generate cases from")->required();
  ben->add_option("--out-dir", args.out_dir, "Output directory")->required();

  auto* grd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grd->add_option("--component", args.component, "Component name or 'all'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    std::cerr << app.help();
    return status;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "icosphere") return shapecomp::cli::run_icosphere(args);
    if (command == "remesh") return shapecomp::cli::run_remesh(args);
    if (command == "synth-data") return shapecomp::cli::run_synth_data(args);
    if (command == "augment") return shapecomp::cli::run_augment(args);
    if (command == "train") return shapecomp::cli::run_train(args);
    if (command == "encode") return shapecomp::cli::run_encode(args);
    if (command == "complete") return shapecomp::cli::run_complete(args);
    if (command == "benchmark") return shapecomp::cli::run_benchmark_command(args);
    if (command == "gradcheck") return shapecomp::cli::run_gradcheck(args);
  } catch (const shapecomp::Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 2;
}
