#pragma once

#include <filesystem>

#include "shapecomp/gcvae.hpp"

namespace shapecomp {

inline constexpr int kCheckpointVersion = 1;

/// Writes `path` (JSON manifest) and `path` with extension ".bin" (tensors
/// as little-endian float64, concatenated in manifest order).
void save_model(const ModelParams& params, const std::filesystem::path& path);

/// Reads a checkpoint without binding it to a topology. Throws
/// CheckpointError (version or corrupt) on malformed input.
ModelParams load_model_params(const std::filesystem::path& path);

/// Reads a checkpoint and binds it to `topology`. A fingerprint mismatch
/// throws CheckpointError with reason kFingerprint.
ShapeModel load_model(const std::filesystem::path& path, TopologyPtr topology);

/// Path of the binary payload that accompanies a manifest.
std::filesystem::path checkpoint_data_path(const std::filesystem::path& manifest);

}  // namespace shapecomp
