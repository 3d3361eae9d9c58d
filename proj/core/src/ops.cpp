#include "shapecomp/ops.hpp"

#include <cmath>
#include <string>

#include "shapecomp/errors.hpp"
#include "shapecomp/mesh.hpp"

namespace shapecomp {

Tensor softmax(const Tensor& values) {
  Tensor out(values.rows(), values.cols());
  for (Index i = 0; i < values.rows(); ++i) {
    const double m = values.row(i).maxCoeff();
    double total = 0.0;
    for (Index j = 0; j < values.cols(); ++j) {
      out(i, j) = std::exp(values(i, j) - m);
      total += out(i, j);
    }
    out.row(i) /= total;
  }
  return out;
}

namespace ad {
namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands on different tapes");
  }
  return *a.tape();
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()) + ")");
  }
}

bool any_grad(Tape& t, Var a) { return t.requires_grad(a); }
bool any_grad(Tape& t, Var a, Var b) { return t.requires_grad(a) || t.requires_grad(b); }

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) throw ContractError("matmul: inner dimensions differ");
  Tensor out = a.value() * b.value();
  return t.record("matmul", std::move(out), any_grad(t, a, b), [a, b](const Tensor& g, Tape& tp) {
    if (tp.requires_grad(a)) tp.accumulate(a, g * b.value().transpose());
    if (tp.requires_grad(b)) tp.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value().transpose();
  return t.record("transpose", std::move(out), any_grad(t, a),
                  [a](const Tensor& g, Tape& tp) { tp.accumulate(a, g.transpose()); });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(a, b, "add");
  Tensor out = a.value() + b.value();
  return t.record("add", std::move(out), any_grad(t, a, b), [a, b](const Tensor& g, Tape& tp) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape(a, b, "sub");
  Tensor out = a.value() - b.value();
  return t.record("sub", std::move(out), any_grad(t, a, b), [a, b](const Tensor& g, Tape& tp) {
    tp.accumulate(a, g);
    if (tp.requires_grad(b)) tp.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  require_same_shape(a, b, "mul");
  Tensor out = a.value().cwiseProduct(b.value());
  return t.record("mul", std::move(out), any_grad(t, a, b), [a, b](const Tensor& g, Tape& tp) {
    if (tp.requires_grad(a)) tp.accumulate(a, g.cwiseProduct(b.value()));
    if (tp.requires_grad(b)) tp.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double factor) {
  Tape& t = *a.tape();
  Tensor out = a.value() * factor;
  return t.record("scale", std::move(out), any_grad(t, a),
                  [a, factor](const Tensor& g, Tape& tp) { tp.accumulate(a, g * factor); });
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols()) throw ContractError("add_row: row shape mismatch");
  Tensor out = a.value().rowwise() + row.value().row(0);
  return t.record("add_row", std::move(out), any_grad(t, a, row),
                  [a, row](const Tensor& g, Tape& tp) {
                    tp.accumulate(a, g);
                    if (tp.requires_grad(row)) tp.accumulate(row, g.colwise().sum());
                  });
}

Var mul_col(Var a, Var column) {
  Tape& t = same_tape(a, column, "mul_col");
  if (column.cols() != 1 || column.rows() != a.rows()) {
    throw ContractError("mul_col: column shape mismatch");
  }
  Tensor out = a.value().array().colwise() * column.value().col(0).array();
  return t.record("mul_col", std::move(out), any_grad(t, a, column),
                  [a, column](const Tensor& g, Tape& tp) {
                    if (tp.requires_grad(a)) {
                      Tensor ga = g.array().colwise() * column.value().col(0).array();
                      tp.accumulate(a, ga);
                    }
                    if (tp.requires_grad(column)) {
                      Tensor gc = g.cwiseProduct(a.value()).rowwise().sum();
                      tp.accumulate(column, gc);
                    }
                  });
}

Var leaky_relu(Var a, double slope) {
  Tape& t = *a.tape();
  Tensor out = a.value().unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
  return t.record("leaky_relu", std::move(out), any_grad(t, a),
                  [a, slope](const Tensor& g, Tape& tp) {
                    Tensor d = a.value().unaryExpr([slope](double v) { return v > 0 ? 1.0 : slope; });
                    tp.accumulate(a, g.cwiseProduct(d));
                  });
}

Var exp(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value().array().exp().matrix();
  Tensor saved = out;
  return t.record("exp", std::move(out), any_grad(t, a),
                  [a, saved = std::move(saved)](const Tensor& g, Tape& tp) {
                    tp.accumulate(a, g.cwiseProduct(saved));
                  });
}

Var log(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value().array().log().matrix();
  return t.record("log", std::move(out), any_grad(t, a), [a](const Tensor& g, Tape& tp) {
    tp.accumulate(a, g.cwiseQuotient(a.value()));
  });
}

Var square(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value().cwiseAbs2();
  return t.record("square", std::move(out), any_grad(t, a), [a](const Tensor& g, Tape& tp) {
    tp.accumulate(a, 2.0 * g.cwiseProduct(a.value()));
  });
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape();
  Tensor out = softmax(a.value());
  Tensor saved = out;
  return t.record("softmax", std::move(out), any_grad(t, a),
                  [a, s = std::move(saved)](const Tensor& g, Tape& tp) {
                    Tensor d(s.rows(), s.cols());
                    for (Index i = 0; i < s.rows(); ++i) {
                      const double dot = g.row(i).dot(s.row(i));
                      d.row(i) = s.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
                    }
                    tp.accumulate(a, d);
                  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record("sum", std::move(out), any_grad(t, a), [a](const Tensor& g, Tape& tp) {
    tp.accumulate(a, Tensor::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  Tape& t = *a.tape();
  if (a.value().size() == 0) throw ContractError("mean of an empty tensor");
  const double n = static_cast<double>(a.value().size());
  Tensor out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return t.record("mean", std::move(out), any_grad(t, a), [a, n](const Tensor& g, Tape& tp) {
    tp.accumulate(a, Tensor::Constant(a.rows(), a.cols(), g(0, 0) / n));
  });
}

Var row_sum(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value().rowwise().sum();
  return t.record("row_sum", std::move(out), any_grad(t, a), [a](const Tensor& g, Tape& tp) {
    Tensor d = g.col(0).replicate(1, a.cols());
    tp.accumulate(a, d);
  });
}

Var gather_rows(Var a, std::span<const int> rows) {
  Tape& t = *a.tape();
  const Tensor& v = a.value();
  std::vector<int> idx(rows.begin(), rows.end());
  Tensor out(static_cast<Index>(idx.size()), v.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= v.rows()) {
      throw ContractError("gather_rows: index " + std::to_string(idx[k]) + " out of range");
    }
    out.row(static_cast<Index>(k)) = v.row(idx[k]);
  }
  return t.record("gather_rows", std::move(out), any_grad(t, a),
                  [a, idx = std::move(idx)](const Tensor& g, Tape& tp) {
                    Tensor d = Tensor::Zero(a.rows(), a.cols());
                    for (std::size_t k = 0; k < idx.size(); ++k) d.row(idx[k]) += g.row(static_cast<Index>(k));
                    tp.accumulate(a, d);
                  });
}

Var reshape(Var a, Index rows, Index cols) {
  Tape& t = *a.tape();
  if (rows * cols != a.value().size()) throw ContractError("reshape: size mismatch");
  Tensor out = Eigen::Map<const Tensor>(a.value().data(), rows, cols);
  const Index r0 = a.rows();
  const Index c0 = a.cols();
  return t.record("reshape", std::move(out), any_grad(t, a),
                  [a, r0, c0](const Tensor& g, Tape& tp) {
                    Tensor d = Eigen::Map<const Tensor>(g.data(), r0, c0);
                    tp.accumulate(a, d);
                  });
}

Var slice_cols(Var a, Index begin, Index count) {
  Tape& t = *a.tape();
  if (begin < 0 || count < 0 || begin + count > a.cols()) throw ContractError("slice_cols: out of range");
  Tensor out = a.value().middleCols(begin, count);
  return t.record("slice_cols", std::move(out), any_grad(t, a),
                  [a, begin, count](const Tensor& g, Tape& tp) {
                    Tensor d = Tensor::Zero(a.rows(), a.cols());
                    d.middleCols(begin, count) = g;
                    tp.accumulate(a, d);
                  });
}

Var max_element(Var a) {
  Tape& t = *a.tape();
  const Tensor& v = a.value();
  if (v.size() == 0) throw ContractError("max_element of an empty tensor");
  Index best = 0;
  for (Index k = 1; k < v.size(); ++k) {
    if (v.data()[k] > v.data()[best]) best = k;
  }
  Tensor out(1, 1);
  out(0, 0) = v.data()[best];
  return t.record("max_element", std::move(out), any_grad(t, a),
                  [a, best](const Tensor& g, Tape& tp) {
                    Tensor d = Tensor::Zero(a.rows(), a.cols());
                    d.data()[best] = g(0, 0);
                    tp.accumulate(a, d);
                  });
}

Var neighbor_mean(Var a, const Topology& topology) {
  Tape& t = *a.tape();
  const Index n = topology.vertex_count();
  if (n == 0 || a.rows() % n != 0) throw ContractError("neighbor_mean: row count is not a multiple of N");
  const Index copies = a.rows() / n;
  const auto& off = topology.neighbor_offsets();
  const auto& nbr = topology.neighbor_indices();
  const Tensor& v = a.value();
  Tensor out = Tensor::Zero(v.rows(), v.cols());
  for (Index b = 0; b < copies; ++b) {
    for (Index i = 0; i < n; ++i) {
      const int deg = off[i + 1] - off[i];
      if (deg == 0) continue;
      for (int k = off[i]; k < off[i + 1]; ++k) out.row(b * n + i) += v.row(b * n + nbr[k]);
      out.row(b * n + i) /= static_cast<double>(deg);
    }
  }
  return t.record("neighbor_mean", std::move(out), any_grad(t, a),
                  [a, &topology, n, copies](const Tensor& g, Tape& tp) {
                    const auto& o = topology.neighbor_offsets();
                    const auto& nb = topology.neighbor_indices();
                    Tensor d = Tensor::Zero(a.rows(), a.cols());
                    for (Index b = 0; b < copies; ++b) {
                      for (Index i = 0; i < n; ++i) {
                        const int deg = o[i + 1] - o[i];
                        if (deg == 0) continue;
                        const double w = 1.0 / deg;
                        for (int k = o[i]; k < o[i + 1]; ++k) d.row(b * n + nb[k]) += w * g.row(b * n + i);
                      }
                    }
                    tp.accumulate(a, d);
                  });
}

Var batch_norm(Var x, Var gamma, Var beta, const Tensor& running_mean,
               const Tensor& running_var, bool training, double epsilon,
               BatchNormStats* batch_stats) {
  Tape& t = same_tape(x, gamma, "batch_norm");
  same_tape(x, beta, "batch_norm");
  const Index c = x.cols();
  const Index n = x.rows();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
    throw ContractError("batch_norm: affine parameter shape mismatch");
  }
  const Tensor& v = x.value();
  Tensor mu(1, c);
  Tensor var(1, c);
  if (training) {
    if (n < 2) throw ContractError("batch_norm: training mode needs at least two rows");
    mu = v.colwise().mean();
    for (Index j = 0; j < c; ++j) var(0, j) = (v.col(j).array() - mu(0, j)).square().sum() / n;
    if (batch_stats) {
      batch_stats->mean = mu;
      batch_stats->variance = var * (static_cast<double>(n) / static_cast<double>(n - 1));
    }
  } else {
    mu = running_mean;
    var = running_var;
  }
  Tensor inv_std = (var.array() + epsilon).rsqrt().matrix();
  Tensor xhat(n, c);
  for (Index j = 0; j < c; ++j) xhat.col(j) = (v.col(j).array() - mu(0, j)) * inv_std(0, j);
  Tensor out(n, c);
  for (Index j = 0; j < c; ++j) out.col(j) = xhat.col(j).array() * gamma.value()(0, j) + beta.value()(0, j);

  const bool needs = t.requires_grad(x) || t.requires_grad(gamma) || t.requires_grad(beta);
  return t.record("batch_norm", std::move(out), needs,
                  [x, gamma, beta, training, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      const Tensor& g, Tape& tp) {
                    const Index rows = g.rows();
                    const Index cols = g.cols();
                    if (tp.requires_grad(gamma)) tp.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
                    if (tp.requires_grad(beta)) tp.accumulate(beta, g.colwise().sum());
                    if (!tp.requires_grad(x)) return;
                    Tensor dx(rows, cols);
                    for (Index j = 0; j < cols; ++j) {
                      const double gj = gamma.value()(0, j);
                      if (!training) {
                        dx.col(j) = g.col(j) * (gj * inv_std(0, j));
                        continue;
                      }
                      const Eigen::ArrayXd dxhat = g.col(j).array() * gj;
                      const double s1 = dxhat.sum();
                      const double s2 = (dxhat * xhat.col(j).array()).sum();
                      dx.col(j) = ((static_cast<double>(rows) * dxhat - s1 - xhat.col(j).array() * s2) *
                                   (inv_std(0, j) / static_cast<double>(rows)))
                                      .matrix();
                    }
                    tp.accumulate(x, dx);
                  });
}

}  // namespace ad
}  // namespace shapecomp
