#include "shapecomp/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "shapecomp/errors.hpp"

namespace shapecomp {

Evaluation evaluate_with_gradients(const Program& program, std::span<const Tensor> inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.watch(t));
  Var out = program(tape, vars);
  if (out.value().size() != 1) throw ContractError("program must return a scalar");
  tape.backward(out);
  Evaluation e;
  e.value = out.scalar();
  for (const Var& v : vars) e.gradients.push_back(tape.gradient(v));
  return e;
}

double evaluate(const Program& program, std::span<const Tensor> inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.constant(t));
  return program(tape, vars).scalar();
}

GradCheckResult finite_diff_check(const Program& program, std::span<const Tensor> inputs,
                                  double h) {
  GradCheckResult result;
  result.analytic = evaluate_with_gradients(program, inputs).gradients;
  std::vector<Tensor> work(inputs.begin(), inputs.end());
  for (std::size_t k = 0; k < work.size(); ++k) {
    Tensor numeric(work[k].rows(), work[k].cols());
    for (Index i = 0; i < work[k].size(); ++i) {
      const double saved = work[k].data()[i];
      work[k].data()[i] = saved + h;
      const double fp = evaluate(program, work);
      work[k].data()[i] = saved - h;
      const double fm = evaluate(program, work);
      work[k].data()[i] = saved;
      numeric.data()[i] = (fp - fm) / (2.0 * h);
    }
    result.numeric.push_back(std::move(numeric));
  }

  double scale = 0.0;
  for (std::size_t k = 0; k < work.size(); ++k) {
    if (result.analytic[k].size() == 0) continue;
    scale = std::max({scale, result.analytic[k].cwiseAbs().maxCoeff(),
                      result.numeric[k].cwiseAbs().maxCoeff()});
  }
  const double floor = std::max(1e-4 * scale, 1e-12);
  for (std::size_t k = 0; k < work.size(); ++k) {
    for (Index i = 0; i < work[k].size(); ++i) {
      const double a = result.analytic[k].data()[i];
      const double f = result.numeric[k].data()[i];
      const double denom = std::max({std::abs(a), std::abs(f), floor});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a - f) / denom);
    }
  }
  return result;
}

GradCheckResult finite_diff_check(const std::function<Var(Tape&, Var)>& program,
                                  const Tensor& input, double h) {
  Program wrapped = [&program](Tape& t, std::span<const Var> v) { return program(t, v[0]); };
  const Tensor inputs[1] = {input};
  return finite_diff_check(wrapped, inputs, h);
}

}  // namespace shapecomp
