#include "shapecomp/completion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <unordered_set>

#include <json.hpp>

#include "shapecomp/adam.hpp"
#include "shapecomp/errors.hpp"
#include "shapecomp/mesh_io.hpp"
#include "shapecomp/parallel.hpp"
#include "shapecomp/rng.hpp"

namespace shapecomp {

void SelectionMask::validate(int vertex_count) const {
  if (indices.empty()) throw ContractError("selection mask is empty");
  std::unordered_set<int> seen;
  for (int i : indices) {
    if (i < 0 || i >= vertex_count) {
      throw ContractError("selection index " + std::to_string(i) + " out of range [0, " +
                          std::to_string(vertex_count) + ")");
    }
    if (!seen.insert(i).second) throw ContractError("selection index " + std::to_string(i) + " repeated");
  }
}

void save_mask(const SelectionMask& mask, const std::string& fingerprint, const std::filesystem::path& path) {
  nlohmann::json j = {{"topology_fingerprint", fingerprint}, {"indices", mask.indices}, {"provenance", mask.provenance}};
  write_text_atomic(path, j.dump(2) + "\n");
}

SelectionMask load_mask(const std::filesystem::path& path, const std::string& fingerprint) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "mask " + path.string() + ": " + e.what());
  }
  SelectionMask mask;
  try {
    const std::string stored = j.at("topology_fingerprint").get<std::string>();
    require_same_topology(fingerprint, stored, "mask");
    mask.indices = j.at("indices").get<std::vector<int>>();
    mask.provenance = j.value("provenance", path.string());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "mask " + path.string() + ": " + e.what());
  }
  return mask;
}

SelectionMask view_mask(const Mesh& mesh, const Vec3& view) {
  const Tensor normals = vertex_normals(mesh);
  SelectionMask mask;
  for (Index i = 0; i < normals.rows(); ++i) {
    if (normals.row(i).dot(view.transpose()) > 0.0) mask.indices.push_back(static_cast<int>(i));
  }
  mask.provenance = "view(" + format_double(view.x()) + "," + format_double(view.y()) + "," +
                    format_double(view.z()) + ")";
  if (mask.indices.empty()) throw ContractError("view mask: no vertex faces the view direction");
  return mask;
}

SelectionMask farthest_point_sample(const Tensor& points, std::span<const int> candidates, int k, int start) {
  const int count = static_cast<int>(candidates.size());
  if (k < 1 || k > count) {
    throw ContractError("farthest_point_sample: k = " + std::to_string(k) + " with " + std::to_string(count) +
                        " candidates");
  }
  if (start < 0 || start >= count) throw ContractError("farthest_point_sample: start out of range");
  for (int c : candidates) {
    if (c < 0 || c >= points.rows()) throw ContractError("farthest_point_sample: candidate out of range");
  }
  SelectionMask out;
  out.provenance = "fps";
  std::vector<double> dist(count, std::numeric_limits<double>::infinity());
  std::vector<char> taken(count, 0);
  int current = start;
  for (int step = 0; step < k; ++step) {
    out.indices.push_back(candidates[current]);
    taken[current] = 1;
    const auto p = points.row(candidates[current]);
    int best = -1;
    for (int c = 0; c < count; ++c) {
      if (taken[c]) continue;
      dist[c] = std::min(dist[c], (points.row(candidates[c]) - p).squaredNorm());
      if (best < 0 || dist[c] > dist[best] || (dist[c] == dist[best] && candidates[c] < candidates[best])) best = c;
    }
    current = best;
  }
  return out;
}

SelectionMask farthest_point_sample_seeded(const Tensor& points, std::span<const int> candidates, int k,
                                           std::uint64_t seed) {
  if (candidates.empty()) throw ContractError("farthest_point_sample: no candidates");
  CounterRng rng(seed);
  return farthest_point_sample(points, candidates, k, static_cast<int>(rng.below(candidates.size())));
}

Tensor apply_selection(const Mesh& mesh, const SelectionMask& mask) {
  mask.validate(static_cast<int>(mesh.vertex_count()));
  Tensor out(static_cast<Index>(mask.indices.size()), 3);
  for (std::size_t k = 0; k < mask.indices.size(); ++k) out.row(static_cast<Index>(k)) = mesh.vertices().row(mask.indices[k]);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kSmallAngle = 1e-6;

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

/// R and dR/dr_k.
Mat3 rodrigues_with_jacobian(const Vec3& r, std::array<Mat3, 3>* jac) {
  const double theta = r.norm();
  const Mat3 k = skew(r);
  Mat3 rot;
  if (theta < kSmallAngle) {
    rot = Mat3::Identity() + k + 0.5 * k * k;
    if (jac) {
      for (int i = 0; i < 3; ++i) {
        const Mat3 e = skew(Vec3::Unit(i));
        (*jac)[i] = e + 0.5 * (e * k + k * e);
      }
    }
    return rot;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  rot = Mat3::Identity() + a * k + b * k * k;
  if (jac) {
    const Mat3 i_minus_r = Mat3::Identity() - rot;
    for (int i = 0; i < 3; ++i) {
      const Vec3 w = r.cross(i_minus_r.col(i));
      (*jac)[i] = (r[i] * k + skew(w)) * rot / (theta * theta);
    }
  }
  return rot;
}

Vec3 as_vec3(const Tensor& t) {
  if (t.size() != 3) throw ContractError("expected a 3-vector");
  return Vec3(t.data()[0], t.data()[1], t.data()[2]);
}

}  // namespace

Mat3 rotation_from_axis_angle(const Vec3& r) {
  if (!r.allFinite()) throw ContractError("rotation_from_axis_angle: non-finite input");
  return rodrigues_with_jacobian(r, nullptr);
}

namespace ad {

Var rodrigues(Var r) {
  Tape& t = *r.tape();
  const Vec3 v = as_vec3(r.value());
  std::array<Mat3, 3> jac;
  const Mat3 rot = rodrigues_with_jacobian(v, &jac);
  Tensor out = rot;
  const Index rows = r.rows();
  const Index cols = r.cols();
  return t.record("rodrigues", std::move(out), t.requires_grad(r), [r, jac, rows, cols](const Tensor& g, Tape& tp) {
    Tensor d(rows, cols);
    for (int i = 0; i < 3; ++i) d.data()[i] = (g.array() * jac[i].array()).sum();
    tp.accumulate(r, d);
  });
}

}  // namespace ad

// ---------------------------------------------------------------------------

void CompletionConfig::validate() const {
  if (iterations < 1) throw ConfigError("completion: iterations must be positive");
  if (!(lr_z > 0.0) || !(lr_rotation > 0.0) || !(lr_translation > 0.0) || !(refine_lr > 0.0)) {
    throw ConfigError("completion: learning rates must be positive");
  }
  if (refine_iterations < 0) throw ConfigError("completion: refine_iterations must be nonnegative");
  if (hypotheses < 1) throw ConfigError("completion: hypotheses must be at least 1");
  if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance)) {
    throw ConfigError("completion: noise_variance must be nonnegative");
  }
  if (fps_samples < 1) throw ConfigError("completion: fps_samples must be positive");
}

Tensor RigidTransform::to_observation(const Tensor& model_points) const {
  const Mat3 rot = matrix();
  Tensor out(model_points.rows(), 3);
  const Eigen::RowVector3d shift = (anchor + translation).transpose();
  for (Index i = 0; i < model_points.rows(); ++i) {
    out.row(i) = (model_points.row(i) - shift) * rot + cloud_centroid.transpose();
  }
  return out;
}

Tensor RigidTransform::to_model(const Tensor& observed_points) const {
  const Mat3 rot = matrix();
  Tensor out(observed_points.rows(), 3);
  const Eigen::RowVector3d shift = (anchor + translation).transpose();
  for (Index i = 0; i < observed_points.rows(); ++i) {
    out.row(i) = (observed_points.row(i) - cloud_centroid.transpose()) * rot.transpose() + shift;
  }
  return out;
}

CompletionProblem::CompletionProblem(const ShapeModel& model, std::vector<int> selection, const Tensor& cloud,
                                     const Eigen::VectorXd& initial_latent, ChamferMetric metric)
    : model_(&model), selection_(std::move(selection)), metric_(metric) {
  SelectionMask{selection_, ""}.validate(static_cast<int>(model.topology().vertex_count()));
  check_points(cloud, "completion cloud");
  if (initial_latent.size() != model.latent_size()) throw ContractError("completion: latent size mismatch");
  auto [centered, c] = centroid_center(cloud);
  centered_cloud_ = std::move(centered);
  cloud_centroid_ = c;
  const Mesh g = generate(initial_latent, model);
  anchor_ = centroid(apply_selection(g, SelectionMask{selection_, ""}));
}

Var CompletionProblem::objective(Tape& tape, const WeightVars& w, Var z, Var r, Var t) const {
  const Var g = generate_on_tape(model_->params(), w, model_->graph(), z, false);
  const Var xs = ad::gather_rows(g, selection_);
  const Var rot = ad::rodrigues(r);
  const Var moved = ad::matmul(tape.constant(centered_cloud_), ad::transpose(rot));
  const Var y = ad::add_row(ad::add_row(moved, t), tape.constant(anchor_.transpose()));
  return ad::chamfer(xs, y, metric_);
}

double CompletionProblem::objective(const Eigen::VectorXd& z, const Vec3& r, const Vec3& t) const {
  Tape tape;
  const WeightVars w = bind_weights(tape, model_->params(), false, BindScope::kGenerator);
  return objective(tape, w, tape.constant(z.transpose()), tape.constant(r.transpose()), tape.constant(t.transpose()))
      .scalar();
}

// ---------------------------------------------------------------------------

InitResult initialize(const Mesh& preop, const ShapeModel& model, const CompletionConfig& config) {
  config.validate();
  require_same_topology(model.params().fingerprint, preop.fingerprint(), "initialize");
  InitResult out;
  out.encoded = encode(preop, model).first;
  out.latent = out.encoded;
  const int iterations = config.refine ? config.refine_iterations : 0;
  Tensor z = out.encoded.transpose();
  AdamState adam(AdamConfig{config.refine_lr}, z);
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= iterations; ++it) {
    Tape tape;
    const WeightVars w = bind_weights(tape, model.params(), false, BindScope::kGenerator);
    const Var zv = tape.watch(z);
    Var loss;
    try {
      const Var g = generate_on_tape(model.params(), w, model.graph(), zv, false);
      loss = ad::max_element(ad::row_sum(ad::square(ad::sub(g, tape.constant(preop.vertices())))));
    } catch (const NumericError& e) {
      throw DivergenceError(static_cast<std::size_t>(it), std::string("refinement: ") + e.what());
    }
    const double value = loss.scalar();
    out.history.push_back(value);
    if (value < best) {
      best = value;
      out.best_iteration = it;
      out.latent = z.row(0).transpose();
    }
    if (it == iterations) break;
    tape.backward(loss);
    adam.step(z, tape.gradient(zv));
  }
  return out;
}

CompletionResult complete_from_latent(const Eigen::VectorXd& initial_latent, const std::vector<int>& selection,
                                      const PointCloud& cloud, const ShapeModel& model,
                                      const CompletionConfig& config) {
  config.validate();
  const CompletionProblem problem(model, selection, cloud.points(), initial_latent, config.metric);
  Tensor z = initial_latent.transpose();
  Tensor r = Tensor::Zero(1, 3);
  Tensor t = Tensor::Zero(1, 3);
  AdamState adam_z(AdamConfig{config.lr_z}, z);
  AdamState adam_r(AdamConfig{config.lr_rotation}, r);
  AdamState adam_t(AdamConfig{config.lr_translation}, t);

  CompletionResult out{generate(initial_latent, model), generate(initial_latent, model), initial_latent,
                       initial_latent, {}, selection, {}, 0.0, 0.0, 0};
  Tensor best_z = z;
  Tensor best_r = r;
  Tensor best_t = t;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= config.iterations; ++it) {
    Tape tape;
    const WeightVars w = bind_weights(tape, model.params(), false, BindScope::kGenerator);
    const Var zv = tape.watch(z);
    const Var rv = tape.watch(r);
    const Var tv = tape.watch(t);
    Var loss;
    try {
      loss = problem.objective(tape, w, zv, rv, tv);
    } catch (const NumericError& e) {
      throw DivergenceError(static_cast<std::size_t>(it), std::string("completion: ") + e.what());
    }
    const double value = loss.scalar();
    out.history.push_back(value);
    if (value < best) {
      best = value;
      out.best_iteration = it;
      best_z = z;
      best_r = r;
      best_t = t;
    }
    if (it == config.iterations) break;
    tape.backward(loss);
    adam_z.step(z, tape.gradient(zv));
    adam_r.step(r, tape.gradient(rv));
    adam_t.step(t, tape.gradient(tv));
    if (!z.allFinite() || !r.allFinite() || !t.allFinite()) {
      throw DivergenceError(static_cast<std::size_t>(it), "completion: non-finite parameters");
    }
  }
  out.initial_objective = out.history.front();
  out.final_objective = best;
  out.latent = best_z.row(0).transpose();
  out.transform.rotation = as_vec3(best_r);
  out.transform.translation = as_vec3(best_t);
  out.transform.cloud_centroid = problem.cloud_centroid();
  out.transform.anchor = problem.anchor();
  out.model_mesh = generate(out.latent, model);
  out.mesh = out.model_mesh.with_vertices(out.transform.to_observation(out.model_mesh.vertices()));
  return out;
}

std::vector<int> sample_selection(const Mesh& preop, const SelectionMask& mask, const CompletionConfig& config) {
  mask.validate(static_cast<int>(preop.vertex_count()));
  const int k = std::min<int>(config.fps_samples, static_cast<int>(mask.indices.size()));
  return farthest_point_sample_seeded(preop.vertices(), mask.indices, k, derive_seed(config.seed, 0)).indices;
}

CompletionResult complete(const Mesh& preop, const PointCloud& cloud, const SelectionMask& mask,
                          const ShapeModel& model, const CompletionConfig& config) {
  const InitResult init = initialize(preop, model, config);
  return complete_from_latent(init.latent, sample_selection(preop, mask, config), cloud, model, config);
}

std::vector<CompletionResult> multi_hypothesis_from_latent(const Eigen::VectorXd& initial_latent,
                                                           const std::vector<int>& selection,
                                                           const PointCloud& cloud, const ShapeModel& model,
                                                           const CompletionConfig& config) {
  config.validate();
  const double sigma = std::sqrt(config.noise_variance);
  std::vector<Eigen::VectorXd> starts;
  for (int k = 0; k < config.hypotheses; ++k) {
    CounterRng rng(derive_seed(config.seed, static_cast<std::uint64_t>(k) + 1));
    Eigen::VectorXd z = initial_latent;
    for (Index d = 0; d < z.size(); ++d) z[d] += sigma * rng.normal();
    starts.push_back(std::move(z));
  }
  std::vector<std::optional<CompletionResult>> slots(starts.size());
  parallel_for(starts.size(), config.threads, [&](std::size_t k) {
    slots[k] = complete_from_latent(starts[k], selection, cloud, model, config);
  });
  std::vector<CompletionResult> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<CompletionResult> multi_hypothesis(const Mesh& preop, const PointCloud& cloud, const SelectionMask& mask,
                                               const ShapeModel& model, const CompletionConfig& config) {
  const InitResult init = initialize(preop, model, config);
  return multi_hypothesis_from_latent(init.latent, sample_selection(preop, mask, config), cloud, model, config);
}

}  // namespace shapecomp
