#include "shapecomp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "shapecomp/errors.hpp"
#include "shapecomp/mesh_io.hpp"

namespace shapecomp {
namespace {

using json = nlohmann::json;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

void put_le(std::string& out, double value) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[k])) << (8 * k);
  return std::bit_cast<double>(bits);
}

json architecture_json(const Architecture& a) {
  return {{"vertex_count", a.vertex_count},       {"latent_size", a.latent_size},
          {"heads", a.heads},                     {"encoder_channels", a.encoder_channels},
          {"generator_channels", a.generator_channels}, {"leaky_slope", a.leaky_slope},
          {"batch_norm", a.batch_norm}};
}

Architecture architecture_from(const json& j) {
  Architecture a;
  a.vertex_count = j.at("vertex_count").get<int>();
  a.latent_size = j.at("latent_size").get<int>();
  a.heads = j.at("heads").get<int>();
  a.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
  a.generator_channels = j.at("generator_channels").get<std::vector<int>>();
  a.leaky_slope = j.at("leaky_slope").get<double>();
  a.batch_norm = j.at("batch_norm").get<bool>();
  return a;
}

struct Slot {
  std::string name;
  std::string role;
  Tensor* tensor;
};

std::vector<Slot> slots(ModelParams& p) {
  std::vector<Slot> out;
  for (auto& [name, t] : p.parameters()) out.push_back({name, "parameter", t});
  for (auto& [name, t] : p.buffers()) out.push_back({name, "running_statistic", t});
  return out;
}

[[noreturn]] void corrupt(const std::string& msg) {
  throw CheckpointError(CheckpointError::Reason::kCorrupt, msg);
}

}  // namespace

std::filesystem::path checkpoint_data_path(const std::filesystem::path& manifest) {
  std::filesystem::path p = manifest;
  p.replace_extension(".bin");
  if (p == manifest) p += ".bin";
  return p;
}

void save_model(const ModelParams& params, const std::filesystem::path& path) {
  ModelParams copy = params;
  std::string payload;
  json index = json::array();
  json stats = json::array();
  std::size_t offset = 0;
  for (const Slot& s : slots(copy)) {
    const Tensor& t = *s.tensor;
    for (Index i = 0; i < t.size(); ++i) put_le(payload, t.data()[i]);
    index.push_back({{"name", s.name}, {"role", s.role}, {"rows", t.rows()}, {"cols", t.cols()}, {"offset", offset}});
    if (s.role == "running_statistic") stats.push_back(s.name);
    offset += static_cast<std::size_t>(t.size());
  }
  const std::filesystem::path data = checkpoint_data_path(path);
  json manifest = {
      {"format_version", kCheckpointVersion},
      {"architecture", architecture_json(params.arch)},
      {"topology_fingerprint", params.fingerprint},
      {"normalization_statistics",
       {{"momentum", kNormMomentum}, {"epsilon", kNormEpsilon}, {"tensors", stats}}},
      {"tensor_index", index},
      {"data_file", data.filename().string()},
      {"data_values", offset},
      {"data_checksum", hex64(fnv1a(payload))},
  };
  write_text_atomic(data, payload);
  write_text_atomic(path, manifest.dump(2) + "\n");
}

ModelParams load_model_params(const std::filesystem::path& path) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    corrupt("checkpoint manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    if (!manifest.contains("format_version") || !manifest["format_version"].is_number_integer()) {
      corrupt("checkpoint manifest has no format_version");
    }
    const int version = manifest["format_version"].get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError(CheckpointError::Reason::kVersion,
                            "checkpoint format_version " + std::to_string(version) + " is not supported (expected " +
                                std::to_string(kCheckpointVersion) + ")");
    }
    const Architecture arch = architecture_from(manifest.at("architecture"));
    const std::string fingerprint = manifest.at("topology_fingerprint").get<std::string>();
    if (fingerprint.empty()) corrupt("checkpoint has an empty topology fingerprint");
    ModelParams params = allocate_model(arch, fingerprint);

    std::filesystem::path data = path.parent_path() / manifest.at("data_file").get<std::string>();
    std::string payload;
    {
      std::ifstream in(data, std::ios::binary);
      if (!in) corrupt("checkpoint data file " + data.string() + " is missing");
      payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    const std::size_t values = manifest.at("data_values").get<std::size_t>();
    if (payload.size() != values * 8) {
      corrupt("checkpoint data file has " + std::to_string(payload.size()) + " bytes, expected " +
              std::to_string(values * 8));
    }
    if (hex64(fnv1a(payload)) != manifest.at("data_checksum").get<std::string>()) {
      corrupt("checkpoint data checksum mismatch");
    }
    const json& index = manifest.at("tensor_index");
    auto expected = slots(params);
    if (index.size() != expected.size()) corrupt("checkpoint tensor index does not match the architecture");
    for (std::size_t k = 0; k < expected.size(); ++k) {
      const json& e = index[k];
      Tensor& t = *expected[k].tensor;
      if (e.at("name").get<std::string>() != expected[k].name || e.at("rows").get<Index>() != t.rows() ||
          e.at("cols").get<Index>() != t.cols()) {
        corrupt("checkpoint tensor " + std::to_string(k) + " does not match the architecture (" + expected[k].name + ")");
      }
      const std::size_t off = e.at("offset").get<std::size_t>();
      if (off + static_cast<std::size_t>(t.size()) > values) corrupt("checkpoint tensor offset out of range");
      for (Index i = 0; i < t.size(); ++i) t.data()[i] = get_le(payload.data() + 8 * (off + i));
      if (!t.allFinite()) corrupt("checkpoint tensor " + expected[k].name + " has non-finite values");
    }
    return params;
  } catch (const json::exception& e) {
    corrupt(std::string("checkpoint manifest is malformed: ") + e.what());
  } catch (const ContractError& e) {
    corrupt(std::string("checkpoint architecture is invalid: ") + e.what());
  }
}

ShapeModel load_model(const std::filesystem::path& path, TopologyPtr topology) {
  ModelParams params = load_model_params(path);
  if (!topology) throw ContractError("load_model: null topology");
  if (params.fingerprint != topology->fingerprint()) {
    throw CheckpointError(CheckpointError::Reason::kFingerprint,
                          "checkpoint is bound to topology " + params.fingerprint + ", requested " +
                              topology->fingerprint());
  }
  return ShapeModel(std::move(params), std::move(topology));
}

}  // namespace shapecomp
