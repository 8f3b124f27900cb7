#pragma once

#include "spamgan/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spamgan {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Builds the loss on a fresh graph. Must be deterministic in the parameters.
using LossBuilder = std::function<Var<double>(Graph<double>&, ParamSet<double>&)>;

/// Compares reverse-mode gradients with fourth-order central finite differences
/// over every coordinate of the parameters named in `names` (all parameters
/// when empty).
/// Relative error is |analytic - numeric| / max(1e-8, |numeric|).
inline GradCheckResult grad_check(const LossBuilder& loss_fn, ParamSet<double>& params, double step = 1e-4,
                                  std::vector<std::string> names = {}) {
  if (names.empty()) names = params.names();
  auto evaluate = [&]() {
    Graph<double> g;
    const double v = loss_fn(g, params).item();
    if (!std::isfinite(v)) throw std::domain_error("grad_check: non-finite loss");
    return v;
  };

  params.zero_grad();
  {
    Graph<double> g;
    auto loss = loss_fn(g, params);
    if (!std::isfinite(loss.item())) throw std::domain_error("grad_check: non-finite loss");
    g.backward(loss);
  }

  GradCheckResult result;
  for (const auto& name : names) {
    auto& t = params.at(name);
    const Matrix<double> analytic = t.has_grad() ? t.grad : Matrix<double>::Zero(t.rows(), t.cols());
    for (Index i = 0; i < t.value.size(); ++i) {
      double& x = t.value.data()[i];
      const double saved = x;
      auto at = [&](double offset) {
        x = saved + offset;
        return evaluate();
      };
      const double numeric = (8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step))) / (12.0 * step);
      x = saved;
      const double a = analytic.data()[i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(numeric));
      ++result.coordinates;
      if (result.worst_index < 0 || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace spamgan
