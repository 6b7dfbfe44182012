#pragma once

#include <cmath>

#include "user/common/rng.hpp"
#include "user/numerics/graph.hpp"

namespace user::init {

template <typename S>
ad::Matrix<S> uniform(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  ad::Matrix<S> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<S>(rng.uniform(-bound, bound));
  return m;
}

/// Glorot-uniform weight of shape (out x in).
template <typename S>
ad::Matrix<S> xavier(Eigen::Index out, Eigen::Index in, Rng& rng) {
  return uniform<S>(out, in, std::sqrt(6.0 / static_cast<double>(in + out)), rng);
}

template <typename S>
ad::Matrix<S> zeros(Eigen::Index rows, Eigen::Index cols) {
  return ad::Matrix<S>::Zero(rows, cols);
}

template <typename S>
ad::Matrix<S> ones(Eigen::Index rows, Eigen::Index cols) {
  return ad::Matrix<S>::Ones(rows, cols);
}

}  // namespace user::init
