#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "morphome/nn/graph.hpp"

namespace morphome::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
};

// Compares backward() against central differences for every entry of every
// parameter. `build` must rebuild the same scalar loss from scratch (any
// randomness inside it has to be reseeded per call). Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradCheckResult gradient_check(const std::vector<Parameter<double>*>& params,
                                      const std::function<Var<double>(Graph<double>&)>& build, double step = 1e-5,
                                      double floor = 1e-6) {
  for (auto* p : params) p->zero_grad();
  {
    Graph<double> g;
    g.backward(build(g));
  }
  GradCheckResult result;
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + step;
      double plus;
      {
        Graph<double> g(false);
        plus = build(g).value()(0, 0);
      }
      x = saved - step;
      double minus;
      {
        Graph<double> g(false);
        minus = build(g).value()(0, 0);
      }
      x = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double analytic = p->grad.data()[i];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace morphome::nn
