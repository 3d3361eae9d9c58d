#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace shapecomp::cli {

/// Flags of every subcommand; each command reads the ones it declares.
struct Args {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> overrides;
  int threads = 1;
  bool verbose = false;

  std::optional<int> level;
  std::optional<int> count;
  std::optional<std::uint64_t> seed;
  std::optional<int> hypotheses;
  std::filesystem::path out;
  std::filesystem::path out_dir;
  std::filesystem::path target;
  std::filesystem::path base;
  std::filesystem::path in;
  std::filesystem::path spec;
  std::filesystem::path dataset_manifest;
  std::filesystem::path mesh;
  std::filesystem::path model;
  std::filesystem::path preop;
  std::filesystem::path cloud;
  std::filesystem::path mask;
  std::filesystem::path cases;
  std::string component = "all";
};

int run_icosphere(const Args& a);
int run_remesh(const Args& a);
int run_synth_data(const Args& a);
int run_augment(const Args& a);
int run_train(const Args& a);
int run_encode(const Args& a);
int run_complete(const Args& a);
int run_benchmark_command(const Args& a);
int run_gradcheck(const Args& a);

}  // namespace shapecomp::cli
