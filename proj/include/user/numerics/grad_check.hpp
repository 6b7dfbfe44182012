#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "user/common/rng.hpp"
#include "user/numerics/graph.hpp"

namespace user::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of `loss` against central differences on
/// up to `samples_per_param` coordinates of every parameter in `store`.
/// Relative error per coordinate: |a - n| / max(1, |a|, |n|).
inline GradCheckResult grad_check(const std::function<Var<double>(Graph<double>&)>& loss, ParamStore<double>& store,
                                  double eps = 1e-5, std::size_t samples_per_param = 16, std::uint64_t seed = 1) {
  {
    Graph<double> g(&store);
    for (auto& p : store) p.grad = Matrix<double>::Zero(p.value.rows(), p.value.cols());
    auto l = loss(g);
    if (!std::isfinite(l.scalar())) throw NumericError("grad_check: non-finite loss");
    g.backward(l);
  }
  auto eval = [&]() {
    Graph<double> g(&store, false);
    const double v = loss(g).scalar();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss under perturbation");
    return v;
  };
  Rng rng(seed);
  GradCheckResult result;
  for (auto& p : store) {
    const auto n = static_cast<std::size_t>(p.value.size());
    std::vector<std::size_t> coords;
    if (n <= samples_per_param) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < samples_per_param; ++i) coords.push_back(rng.index(n));
    }
    for (std::size_t c : coords) {
      double& x = p.value.data()[c];
      const double saved = x;
      x = saved + eps;
      const double up = eval();
      x = saved - eps;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p.grad.data()[c];
      const double err = std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
      ++result.coordinates;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = p.name;
      }
    }
  }
  for (auto& p : store) p.grad.setZero();
  return result;
}

}  // namespace user::ad
