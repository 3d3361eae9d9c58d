#include "config.hpp"

#include "shapecomp/errors.hpp"
#include "shapecomp/mesh_io.hpp"

namespace shapecomp::cli {
namespace {

json perturbation_defaults() {
  const PerturbationSpec d;
  return {{"low_index", d.low_index},   {"low_min", d.low_min},   {"low_max", d.low_max},
          {"high_min", d.high_min},     {"high_max", d.high_max}, {"high_index_cap", d.high_index_cap}};
}

json completion_defaults() {
  const CompletionConfig d;
  return {{"iterations", d.iterations},
          {"lr_z", d.lr_z},
          {"lr_rotation", d.lr_rotation},
          {"lr_translation", d.lr_translation},
          {"refine", d.refine},
          {"refine_iterations", d.refine_iterations},
          {"refine_lr", d.refine_lr},
          {"hypotheses", d.hypotheses},
          {"noise_variance", d.noise_variance},
          {"fps_samples", d.fps_samples},
          {"chamfer_metric", "euclidean"}};
}

void find_unknown(const json& given, const json& allowed, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!allowed.contains(it.key())) {
      out.push_back(path);
      continue;
    }
    const json& a = allowed.at(it.key());
    if (a.is_object() && it.value().is_object()) find_unknown(it.value(), a, path, out);
  }
}

void merge(json& base, const json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object()) {
      merge(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

ChamferMetric parse_metric(const std::string& s) {
  if (s == "euclidean") return ChamferMetric::kEuclidean;
  if (s == "squared") return ChamferMetric::kSquared;
  throw ConfigError("chamfer_metric must be \"euclidean\" or \"squared\", got \"" + s + "\"");
}

template <typename T>
T field(const json& section, const char* key) {
  try {
    return section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

json default_config(const std::string& command) {
  if (command == "icosphere") return {{"level", 3}, {"radius", 1.0}};
  if (command == "remesh") {
    const RemeshConfig d;
    return {{"seed", 0},
            {"remesh",
             {{"iterations", d.iterations},
              {"lr", d.learning_rate},
              {"w_chamfer", d.w_chamfer},
              {"w_normal", d.w_normal},
              {"w_laplacian", d.w_laplacian},
              {"w_edge", d.w_edge},
              {"template_level", d.template_level},
              {"chamfer_metric", "euclidean"}}}};
  }
  if (command == "synth-data") return {{"seed", 0}, {"count", 20}, {"perturbation", perturbation_defaults()}};
  if (command == "augment") {
    json j = perturbation_defaults();
    j["seed"] = 0;
    return j;
  }
  if (command == "train") {
    const TrainConfig d;
    return {{"seed", 0},
            {"report_timing", false},
            {"train",
             {{"epochs", d.epochs},
              {"lr", d.learning_rate},
              {"kl_weight", d.kl_weight},
              {"batch_size", d.batch_size},
              {"latent_size", d.latent_size},
              {"heads", d.heads},
              {"encoder_channels", d.encoder_channels},
              {"generator_channels", d.generator_channels},
              {"leaky_slope", d.leaky_slope},
              {"batch_norm", d.batch_norm},
              {"online",
               {{"enabled", d.online.enabled},
                {"max_rotation", d.online.max_rotation},
                {"scale_min", d.online.scale_min},
                {"scale_max", d.online.scale_max},
                {"translation", d.online.translation}}},
              {"spectral",
               {{"enabled", d.spectral_augmentation}, {"copies", d.spectral_copies},
                {"perturbation", perturbation_defaults()}}}}}};
  }
  if (command == "encode") return json::object();
  if (command == "complete") {
    return {{"seed", 0}, {"completion", completion_defaults()}, {"initial_latent", nullptr}};
  }
  if (command == "benchmark") {
    const IcpConfig icp;
    return {{"seed", 0},
            {"report_timing", false},
            {"completion", completion_defaults()},
            {"icp", {{"restarts", icp.restarts}, {"max_iterations", icp.max_iterations}, {"tolerance", icp.tolerance}}},
            {"deformation", {{"perturbation", perturbation_defaults()}, {"view", {0.0, 0.0, 1.0}}}}};
  }
  if (command == "gradcheck") return json::object();
  throw ContractError("no configuration for command '" + command + "'");
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &config;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("unknown config key in override: " + path);
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("override '" + path + "' names a section, not a value");
  *node = value;
}

json resolve_config(const std::string& command, const std::optional<std::filesystem::path>& file,
                    const std::vector<std::string>& overrides) {
  json config = default_config(command);
  if (file) {
    json given;
    try {
      given = json::parse(read_text_file(*file));
    } catch (const json::exception& e) {
      throw ConfigError("config " + file->string() + " is not valid JSON: " + e.what());
    }
    if (!given.is_object()) throw ConfigError("config " + file->string() + " must be a JSON object");
    std::vector<std::string> unknown;
    find_unknown(given, config, "", unknown);
    if (!unknown.empty()) {
      std::string list;
      for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
      throw ConfigError("unknown config keys: " + list);
    }
    merge(config, given);
  }
  for (const std::string& o : overrides) apply_override(config, o);
  return config;
}

RemeshConfig remesh_config(const json& s, std::uint64_t seed) {
  RemeshConfig c;
  c.iterations = field<int>(s, "iterations");
  c.learning_rate = field<double>(s, "lr");
  c.w_chamfer = field<double>(s, "w_chamfer");
  c.w_normal = field<double>(s, "w_normal");
  c.w_laplacian = field<double>(s, "w_laplacian");
  c.w_edge = field<double>(s, "w_edge");
  c.template_level = field<int>(s, "template_level");
  c.chamfer_metric = parse_metric(field<std::string>(s, "chamfer_metric"));
  c.seed = seed;
  return c;
}

PerturbationSpec perturbation_spec(const json& s, std::uint64_t seed) {
  PerturbationSpec p;
  p.low_index = field<int>(s, "low_index");
  p.low_min = field<double>(s, "low_min");
  p.low_max = field<double>(s, "low_max");
  p.high_min = field<double>(s, "high_min");
  p.high_max = field<double>(s, "high_max");
  p.high_index_cap = field<int>(s, "high_index_cap");
  p.seed = seed;
  return p;
}

json perturbation_json(const PerturbationSpec& p) {
  return {{"low_index", p.low_index}, {"low_min", p.low_min},   {"low_max", p.low_max},
          {"high_min", p.high_min},   {"high_max", p.high_max}, {"high_index_cap", p.high_index_cap}};
}

TrainConfig train_config(const json& s, std::uint64_t seed) {
  TrainConfig c;
  c.epochs = field<int>(s, "epochs");
  c.learning_rate = field<double>(s, "lr");
  c.kl_weight = field<double>(s, "kl_weight");
  c.batch_size = field<int>(s, "batch_size");
  c.latent_size = field<int>(s, "latent_size");
  c.heads = field<int>(s, "heads");
  c.encoder_channels = field<std::vector<int>>(s, "encoder_channels");
  c.generator_channels = field<std::vector<int>>(s, "generator_channels");
  c.leaky_slope = field<double>(s, "leaky_slope");
  c.batch_norm = field<bool>(s, "batch_norm");
  const json& o = s.at("online");
  c.online.enabled = field<bool>(o, "enabled");
  c.online.max_rotation = field<double>(o, "max_rotation");
  c.online.scale_min = field<double>(o, "scale_min");
  c.online.scale_max = field<double>(o, "scale_max");
  c.online.translation = field<double>(o, "translation");
  const json& sp = s.at("spectral");
  c.spectral_augmentation = field<bool>(sp, "enabled");
  c.spectral_copies = field<int>(sp, "copies");
  c.spectral = perturbation_spec(sp.at("perturbation"), 0);
  c.seed = seed;
  c.validate();
  return c;
}

CompletionConfig completion_config(const json& s, std::uint64_t seed) {
  CompletionConfig c;
  c.iterations = field<int>(s, "iterations");
  c.lr_z = field<double>(s, "lr_z");
  c.lr_rotation = field<double>(s, "lr_rotation");
  c.lr_translation = field<double>(s, "lr_translation");
  c.refine = field<bool>(s, "refine");
  c.refine_iterations = field<int>(s, "refine_iterations");
  c.refine_lr = field<double>(s, "refine_lr");
  c.hypotheses = field<int>(s, "hypotheses");
  c.noise_variance = field<double>(s, "noise_variance");
  c.fps_samples = field<int>(s, "fps_samples");
  c.metric = parse_metric(field<std::string>(s, "chamfer_metric"));
  c.seed = seed;
  c.validate();
  return c;
}

DeformationSpec deformation_spec(const json& s) {
  DeformationSpec d;
  d.perturbation = perturbation_spec(s.at("perturbation"), 0);
  const auto v = field<std::vector<double>>(s, "view");
  if (v.size() != 3) throw ConfigError("deformation.view must have three entries");
  d.view = Vec3(v[0], v[1], v[2]);
  return d;
}

IcpConfig icp_config(const json& s, std::uint64_t seed) {
  IcpConfig c;
  c.restarts = field<int>(s, "restarts");
  c.max_iterations = field<int>(s, "max_iterations");
  c.tolerance = field<double>(s, "tolerance");
  c.seed = seed;
  c.validate();
  return c;
}

}  // namespace shapecomp::cli
