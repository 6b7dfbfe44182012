#pragma once

#include <cmath>

#include "user/numerics/graph.hpp"

namespace user::ad {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over every parameter, then zeroes the
/// gradients. Every parameter must hold a gradient (see ParamStore::zero_grad).
template <typename S>
void adam_step(ParamStore<S>& store, const AdamOptions& opt = {}) {
  for (const auto& p : store) {
    if (p.grad.size() != p.value.size()) throw Error("adam_step: missing gradient for parameter " + p.name);
  }
  ++store.step;
  const double t = static_cast<double>(store.step);
  const S b1 = static_cast<S>(opt.beta1), b2 = static_cast<S>(opt.beta2);
  const S c1 = static_cast<S>(1.0 - std::pow(opt.beta1, t));
  const S c2 = static_cast<S>(1.0 - std::pow(opt.beta2, t));
  const S lr = static_cast<S>(opt.lr), eps = static_cast<S>(opt.eps);
  for (auto& p : store) {
    p.m = b1 * p.m + (S(1) - b1) * p.grad;
    p.v = b2 * p.v + (S(1) - b2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (p.m.array() / c1) / ((p.v.array() / c2).sqrt() + eps);
    p.grad.setZero();
  }
}

}  // namespace user::ad
