#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapecomp/completion.hpp"
#include "shapecomp/evalbench.hpp"
#include "shapecomp/gcvae.hpp"
#include "shapecomp/remesh.hpp"
#include "shapecomp/spectral.hpp"

namespace shapecomp::cli {

using json = nlohmann::json;

/// Default configuration of a subcommand. Every accepted key appears here.
json default_config(const std::string& command);

/// Defaults, then the file (if any), then "a.b=value" overrides. Unknown
/// keys in the file or overrides raise ConfigError listing all of them.
json resolve_config(const std::string& command, const std::optional<std::filesystem::path>& file,
                    const std::vector<std::string>& overrides);

/// Applies one dotted override to `config`; the path must already exist.
void apply_override(json& config, const std::string& assignment);

RemeshConfig remesh_config(const json& section, std::uint64_t seed);
TrainConfig train_config(const json& section, std::uint64_t seed);
CompletionConfig completion_config(const json& section, std::uint64_t seed);
PerturbationSpec perturbation_spec(const json& section, std::uint64_t seed);
DeformationSpec deformation_spec(const json& section);
IcpConfig icp_config(const json& section, std::uint64_t seed);

json perturbation_json(const PerturbationSpec& spec);

}  // namespace shapecomp::cli
