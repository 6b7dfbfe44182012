#pragma once

// Differentiable ops. Every function records its result on the graph of its
// first argument and defines the matching backward rule.

#include <cmath>
#include <span>
#include <vector>

#include "user/numerics/graph.hpp"

namespace user::ad {

namespace detail {

template <typename S>
void require_same(const char* op, const Matrix<S>& a, const Matrix<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

template <typename S>
Graph<S>& graph_of(std::span<const Var<S>> xs) {
  if (xs.empty()) throw ShapeError("op over an empty list");
  return xs.front().graph();
}

}  // namespace detail

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.cols() != B.rows()) throw ShapeError("matmul: shape mismatch " + shape_str(A) + " vs " + shape_str(B));
  const int ia = a.id(), ib = b.id();
  return a.graph().record(
      A * B, {a, b},
      [ia, ib](Graph<S>& g, const Matrix<S>& G) {
        if (g.requires_grad(ia)) g.accumulate(ia, G * g.value(ib).transpose());
        if (g.requires_grad(ib)) g.accumulate(ib, g.value(ia).transpose() * G);
      },
      "matmul");
}

template <typename S>
Var<S> transpose(Var<S> a) {
  const int ia = a.id();
  return a.graph().record(
      a.value().transpose(), {a}, [ia](Graph<S>& g, const Matrix<S>& G) { g.accumulate(ia, G.transpose()); },
      "transpose");
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  detail::require_same("add", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return a.graph().record(
      a.value() + b.value(), {a, b},
      [ia, ib](Graph<S>& g, const Matrix<S>& G) {
        g.accumulate(ia, G);
        g.accumulate(ib, G);
      },
      "add");
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  detail::require_same("sub", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return a.graph().record(
      a.value() - b.value(), {a, b},
      [ia, ib](Graph<S>& g, const Matrix<S>& G) {
        g.accumulate(ia, G);
        g.accumulate(ib, -G);
      },
      "sub");
}

/// a (r x c) plus column vector b (r x 1) broadcast over columns.
template <typename S>
Var<S> add_bias(Var<S> a, Var<S> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  if (B.cols() != 1 || B.rows() != A.rows())
    throw ShapeError("add_bias: shape mismatch " + shape_str(A) + " vs " + shape_str(B));
  const int ia = a.id(), ib = b.id();
  Matrix<S> out = A.colwise() + B.col(0);
  return a.graph().record(
      std::move(out), {a, b},
      [ia, ib](Graph<S>& g, const Matrix<S>& G) {
        g.accumulate(ia, G);
        if (g.requires_grad(ib)) g.accumulate(ib, G.rowwise().sum());
      },
      "add_bias");
}

/// Elementwise product.
template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  detail::require_same("mul", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return a.graph().record(
      a.value().cwiseProduct(b.value()), {a, b},
      [ia, ib](Graph<S>& g, const Matrix<S>& G) {
        if (g.requires_grad(ia)) g.accumulate(ia, G.cwiseProduct(g.value(ib)));
        if (g.requires_grad(ib)) g.accumulate(ib, G.cwiseProduct(g.value(ia)));
      },
      "mul");
}

template <typename S>
Var<S> scale(Var<S> a, S s) {
  const int ia = a.id();
  return a.graph().record(
      a.value() * s, {a}, [ia, s](Graph<S>& g, const Matrix<S>& G) { g.accumulate(ia, G * s); }, "scale");
}

template <typename S>
Var<S> add_scalar(Var<S> a, S s) {
  const int ia = a.id();
  return a.graph().record(
      (a.value().array() + s).matrix(), {a}, [ia](Graph<S>& g, const Matrix<S>& G) { g.accumulate(ia, G); },
      "add_scalar");
}

template <typename S>
Var<S> tanh(Var<S> a) {
  const int ia = a.id();
  Matrix<S> y = a.value().array().tanh().matrix();
  auto& graph = a.graph();
  const int oid = static_cast<int>(graph.size());
  return graph.record(
      std::move(y), {a},
      [ia, oid](Graph<S>& g, const Matrix<S>& G) {
        const auto& Y = g.value(oid);
        g.accumulate(ia, (G.array() * (S(1) - Y.array().square())).matrix());
      },
      "tanh");
}

template <typename S>
Var<S> relu(Var<S> a) {
  const int ia = a.id();
  return a.graph().record(
      a.value().cwiseMax(S(0)), {a},
      [ia](Graph<S>& g, const Matrix<S>& G) {
        g.accumulate(ia, (g.value(ia).array() > S(0)).select(G, S(0)).matrix());
      },
      "relu");
}

template <typename S>
Var<S> exp(Var<S> a) {
  const int ia = a.id();
  auto& graph = a.graph();
  const int oid = static_cast<int>(graph.size());
  return graph.record(
      a.value().array().exp().matrix(), {a},
      [ia, oid](Graph<S>& g, const Matrix<S>& G) { g.accumulate(ia, G.cwiseProduct(g.value(oid))); }, "exp");
}

template <typename S>
Var<S> log(Var<S> a) {
  if (a.graph().checked() && (a.value().array() <= S(0)).any()) throw NumericError("log of a non-positive value");
  const int ia = a.id();
  return a.graph().record(
      a.value().array().log().matrix(), {a},
      [ia](Graph<S>& g, const Matrix<S>& G) { g.accumulate(ia, G.cwiseQuotient(g.value(ia))); }, "log");
}

/// max(a, lo) elementwise; gradient flows only where a > lo.
template <typename S>
Var<S> clamp_min(Var<S> a, S lo) {
  const int ia = a.id();
  return a.graph().record(
      a.value().cwiseMax(lo), {a},
      [ia, lo](Graph<S>& g, const Matrix<S>& G) {
        g.accumulate(ia, (g.value(ia).array() > lo).select(G, S(0)).matrix());
      },
      "clamp_min");
}

template <typename S>
Var<S> concat_cols(std::span<const Var<S>> xs) {
  auto& graph = detail::graph_of(xs);
  const Eigen::Index rows = xs.front().rows();
  Eigen::Index cols = 0;
  for (const auto& x : xs) {
    if (x.rows() != rows)
      throw ShapeError("concat_cols: shape mismatch " + shape_str(xs.front().value()) + " vs " + shape_str(x.value()));
    cols += x.cols();
  }
  Matrix<S> out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& x : xs) {
    out.middleCols(at, x.cols()) = x.value();
    ids.push_back(x.id());
    offsets.push_back(at);
    at += x.cols();
  }
  std::vector<Var<S>> parents(xs.begin(), xs.end());
  return graph.record(
      std::move(out), parents,
      [ids, offsets](Graph<S>& g, const Matrix<S>& G) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!g.requires_grad(ids[k])) continue;
          g.accumulate(ids[k], G.middleCols(offsets[k], g.value(ids[k]).cols()));
        }
      },
      "concat_cols");
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& xs) {
  return concat_cols(std::span<const Var<S>>(xs));
}

template <typename S>
Var<S> concat_rows(std::span<const Var<S>> xs) {
  auto& graph = detail::graph_of(xs);
  const Eigen::Index cols = xs.front().cols();
  Eigen::Index rows = 0;
  for (const auto& x : xs) {
    if (x.cols() != cols)
      throw ShapeError("concat_rows: shape mismatch " + shape_str(xs.front().value()) + " vs " + shape_str(x.value()));
    rows += x.rows();
  }
  Matrix<S> out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& x : xs) {
    out.middleRows(at, x.rows()) = x.value();
    ids.push_back(x.id());
    offsets.push_back(at);
    at += x.rows();
  }
  std::vector<Var<S>> parents(xs.begin(), xs.end());
  return graph.record(
      std::move(out), parents,
      [ids, offsets](Graph<S>& g, const Matrix<S>& G) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!g.requires_grad(ids[k])) continue;
          g.accumulate(ids[k], G.middleRows(offsets[k], g.value(ids[k]).rows()));
        }
      },
      "concat_rows");
}

template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& xs) {
  return concat_rows(std::span<const Var<S>>(xs));
}

template <typename S>
Var<S> slice_cols(Var<S> a, Eigen::Index start, Eigen::Index n) {
  const auto& A = a.value();
  if (start < 0 || n < 0 || start + n > A.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(start) + "," + std::to_string(start + n) + ") out of " +
                     shape_str(A));
  const int ia = a.id();
  const Eigen::Index r = A.rows(), c = A.cols();
  return a.graph().record(
      A.middleCols(start, n), {a},
      [ia, start, n, r, c](Graph<S>& g, const Matrix<S>& G) {
        if (auto* buf = g.grad_buffer(ia, r, c)) buf->middleCols(start, n) += G;
      },
      "slice_cols");
}

template <typename S>
Var<S> slice_rows(Var<S> a, Eigen::Index start, Eigen::Index n) {
  const auto& A = a.value();
  if (start < 0 || n < 0 || start + n > A.rows())
    throw ShapeError("slice_rows: range [" + std::to_string(start) + "," + std::to_string(start + n) + ") out of " +
                     shape_str(A));
  const int ia = a.id();
  const Eigen::Index r = A.rows(), c = A.cols();
  return a.graph().record(
      A.middleRows(start, n), {a},
      [ia, start, n, r, c](Graph<S>& g, const Matrix<S>& G) {
        if (auto* buf = g.grad_buffer(ia, r, c)) buf->middleRows(start, n) += G;
      },
      "slice_rows");
}

template <typename S>
Var<S> column(Var<S> a, Eigen::Index j) {
  return slice_cols(a, j, 1);
}

/// Sum of all entries, as a 1x1 node.
template <typename S>
Var<S> sum(Var<S> a) {
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.graph().record(
      Matrix<S>::Constant(1, 1, a.value().sum()), {a},
      [ia, r, c](Graph<S>& g, const Matrix<S>& G) { g.accumulate(ia, Matrix<S>::Constant(r, c, G(0, 0))); }, "sum");
}

/// axis 0 reduces over rows (1 x cols); axis 1 reduces over columns (rows x 1).
template <typename S>
Var<S> sum(Var<S> a, int axis) {
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  if (axis == 0) {
    return a.graph().record(
        a.value().colwise().sum(), {a},
        [ia, r](Graph<S>& g, const Matrix<S>& G) { g.accumulate(ia, G.replicate(r, 1)); }, "sum0");
  }
  if (axis != 1) throw ShapeError("sum: axis must be 0 or 1");
  return a.graph().record(
      a.value().rowwise().sum(), {a},
      [ia, c](Graph<S>& g, const Matrix<S>& G) { g.accumulate(ia, G.replicate(1, c)); }, "sum1");
}

template <typename S>
Var<S> mean(Var<S> a) {
  if (a.value().size() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), S(1) / static_cast<S>(a.value().size()));
}

template <typename S>
Var<S> mean(Var<S> a, int axis) {
  const auto n = axis == 0 ? a.rows() : a.cols();
  if (n == 0) throw ShapeError("mean over an empty axis");
  return scale(sum(a, axis), S(1) / static_cast<S>(n));
}

namespace detail {

// Softmax of x restricted to valid entries; invalid entries get exactly 0.
// Returns false when nothing is valid (all-zero output).
template <typename S, typename In, typename Out>
bool masked_softmax(const In& x, const Mask& mask, Out&& y) {
  const Eigen::Index n = x.size();
  S mx = -std::numeric_limits<S>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    if (mask_valid(mask, i)) mx = std::max(mx, x(i));
  if (!std::isfinite(mx)) {
    y.setZero();
    return false;
  }
  S total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const S e = mask_valid(mask, i) ? std::exp(x(i) - mx) : S(0);
    y(i) = e;
    total += e;
  }
  y /= total;
  return true;
}

}  // namespace detail

/// Softmax along `axis` (0: each column is a distribution over rows; 1: each
/// row over columns). `mask` indexes positions along that axis.
template <typename S>
Var<S> softmax(Var<S> a, int axis, const Mask& mask = {}) {
  const auto& A = a.value();
  const Eigen::Index len = axis == 0 ? A.rows() : A.cols();
  if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
  if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != len)
    throw ShapeError("softmax: mask length " + std::to_string(mask.size()) + " vs axis length " + std::to_string(len));
  Matrix<S> Y(A.rows(), A.cols());
  bool degenerate = false;
  if (axis == 0) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) degenerate |= !detail::masked_softmax<S>(A.col(j), mask, Y.col(j));
  } else {
    for (Eigen::Index i = 0; i < A.rows(); ++i) degenerate |= !detail::masked_softmax<S>(A.row(i), mask, Y.row(i));
  }
  auto& graph = a.graph();
  if (degenerate && len > 0) graph.raise_flag();
  const int ia = a.id();
  const int oid = static_cast<int>(graph.size());
  return graph.record(
      std::move(Y), {a},
      [ia, oid, axis](Graph<S>& g, const Matrix<S>& G) {
        const auto& Y = g.value(oid);
        Matrix<S> P = G.cwiseProduct(Y);
        if (axis == 0) {
          const Eigen::Matrix<S, 1, Eigen::Dynamic> dots = P.colwise().sum();
          g.accumulate(ia, P - (Y.array().rowwise() * dots.array()).matrix());
        } else {
          const Eigen::Matrix<S, Eigen::Dynamic, 1> dots = P.rowwise().sum();
          g.accumulate(ia, P - (Y.array().colwise() * dots.array()).matrix());
        }
      },
      "softmax");
}

/// Cosine of two same-shaped tensors as a 1x1 node. A zero-norm operand
/// yields 0 with zero gradient and raises a graph flag.
template <typename S>
Var<S> cosine_similarity(Var<S> a, Var<S> b) {
  detail::require_same("cosine_similarity", a.value(), b.value());
  const auto& A = a.value();
  const auto& B = b.value();
  const S na = A.norm(), nb = B.norm();
  auto& graph = a.graph();
  if (na == S(0) || nb == S(0)) {
    graph.raise_flag();
    return graph.constant(Matrix<S>::Zero(1, 1));
  }
  const S c = A.cwiseProduct(B).sum() / (na * nb);
  const int ia = a.id(), ib = b.id();
  return graph.record(
      Matrix<S>::Constant(1, 1, c), {a, b},
      [ia, ib, na, nb, c](Graph<S>& g, const Matrix<S>& G) {
        const S go = G(0, 0);
        const auto& A = g.value(ia);
        const auto& B = g.value(ib);
        if (g.requires_grad(ia)) g.accumulate(ia, (go * (B / (na * nb) - c * A / (na * na))).eval());
        if (g.requires_grad(ib)) g.accumulate(ib, (go * (A / (na * nb) - c * B / (nb * nb))).eval());
      },
      "cosine_similarity");
}

/// Scales every column to unit norm; zero columns stay zero.
template <typename S>
Var<S> normalize_cols(Var<S> a) {
  const auto& A = a.value();
  Vector<S> norms = A.colwise().norm().transpose();
  Matrix<S> Y = A;
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    if (norms(j) > S(0)) {
      Y.col(j) /= norms(j);
    } else {
      a.graph().raise_flag();
    }
  }
  auto& graph = a.graph();
  const int ia = a.id();
  const int oid = static_cast<int>(graph.size());
  return graph.record(
      std::move(Y), {a},
      [ia, oid, norms](Graph<S>& g, const Matrix<S>& G) {
        const auto& Y = g.value(oid);
        Matrix<S> D = Matrix<S>::Zero(Y.rows(), Y.cols());
        for (Eigen::Index j = 0; j < Y.cols(); ++j) {
          if (norms(j) == S(0)) continue;
          D.col(j) = (G.col(j) - Y.col(j) * Y.col(j).dot(G.col(j))) / norms(j);
        }
        g.accumulate(ia, D);
      },
      "normalize_cols");
}

/// Column-wise layer normalization with per-feature gain and bias (d x 1).
template <typename S>
Var<S> layer_norm(Var<S> x, Var<S> gain, Var<S> bias, S eps = S(1e-5)) {
  const auto& X = x.value();
  const Eigen::Index d = X.rows();
  if (gain.rows() != d || gain.cols() != 1 || bias.rows() != d || bias.cols() != 1)
    throw ShapeError("layer_norm: shape mismatch " + shape_str(X) + " vs " + shape_str(gain.value()));
  Matrix<S> Xhat(d, X.cols());
  Vector<S> inv(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const S mu = X.col(j).mean();
    const S var = (X.col(j).array() - mu).square().mean();
    inv(j) = S(1) / std::sqrt(var + eps);
    Xhat.col(j) = (X.col(j).array() - mu) * inv(j);
  }
  Matrix<S> Y = (Xhat.array().colwise() * gain.value().col(0).array()).matrix();
  Y.colwise() += bias.value().col(0);
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.graph().record(
      std::move(Y), {x, gain, bias},
      [ix, ig, ib, Xhat = std::move(Xhat), inv](Graph<S>& g, const Matrix<S>& G) {
        const Eigen::Index d = Xhat.rows();
        if (g.requires_grad(ig)) g.accumulate(ig, G.cwiseProduct(Xhat).rowwise().sum());
        if (g.requires_grad(ib)) g.accumulate(ib, G.rowwise().sum());
        if (!g.requires_grad(ix)) return;
        const Matrix<S> dxhat = (G.array().colwise() * g.value(ig).col(0).array()).matrix();
        Matrix<S> dx(d, Xhat.cols());
        for (Eigen::Index j = 0; j < Xhat.cols(); ++j) {
          const S s1 = dxhat.col(j).sum();
          const S s2 = dxhat.col(j).dot(Xhat.col(j));
          dx.col(j) = (inv(j) / static_cast<S>(d)) *
                      (static_cast<S>(d) * dxhat.col(j).array() - s1 - Xhat.col(j).array() * s2).matrix();
        }
        g.accumulate(ix, dx);
      },
      "layer_norm");
}

/// Gathers rows of `table` (n x d) into columns: output is d x ids.size().
template <typename S>
Var<S> embedding(Var<S> table, const std::vector<int>& ids) {
  const auto& T = table.value();
  Matrix<S> out(T.cols(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= T.rows())
      throw ShapeError("embedding: id " + std::to_string(ids[i]) + " outside table " + shape_str(T));
    out.col(static_cast<Eigen::Index>(i)) = T.row(ids[i]).transpose();
  }
  const int it = table.id();
  const Eigen::Index r = T.rows(), c = T.cols();
  return table.graph().record(
      std::move(out), {table},
      [it, ids, r, c](Graph<S>& g, const Matrix<S>& G) {
        auto* buf = g.grad_buffer(it, r, c);
        if (!buf) return;
        for (std::size_t i = 0; i < ids.size(); ++i) buf->row(ids[i]) += G.col(static_cast<Eigen::Index>(i)).transpose();
      },
      "embedding");
}

/// Scaled dot-product attention over `heads` row blocks. q: (h*dk) x Mq,
/// k: (h*dk) x Mk, v: (h*dv) x Mk. Query column j attends over the valid key
/// columns; output is (h*dv) x Mq.
template <typename S>
Var<S> multihead_attention(Var<S> q, Var<S> k, Var<S> v, int heads, const Mask& key_mask = {}) {
  const auto& Q = q.value();
  const auto& K = k.value();
  const auto& V = v.value();
  if (heads <= 0 || Q.rows() % heads != 0 || Q.rows() != K.rows() || V.rows() % heads != 0 || K.cols() != V.cols())
    throw ShapeError("multihead_attention: shape mismatch q " + shape_str(Q) + " k " + shape_str(K) + " v " +
                     shape_str(V));
  if (!key_mask.empty() && static_cast<Eigen::Index>(key_mask.size()) != K.cols())
    throw ShapeError("multihead_attention: key mask length mismatch");
  const Eigen::Index dk = Q.rows() / heads, dv = V.rows() / heads;
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dk));
  auto& graph = q.graph();
  std::vector<Matrix<S>> probs(static_cast<std::size_t>(heads));
  Matrix<S> out(V.rows(), Q.cols());
  for (int h = 0; h < heads; ++h) {
    Matrix<S> scores = (K.middleRows(h * dk, dk).transpose() * Q.middleRows(h * dk, dk)) * inv_sqrt;
    Matrix<S>& P = probs[static_cast<std::size_t>(h)];
    P.resize(scores.rows(), scores.cols());
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (!detail::masked_softmax<S>(scores.col(j), key_mask, P.col(j))) graph.raise_flag();
    }
    out.middleRows(h * dv, dv) = V.middleRows(h * dv, dv) * P;
  }
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return graph.record(
      std::move(out), {q, k, v},
      [iq, ik, iv, heads, dk, dv, inv_sqrt, probs = std::move(probs)](Graph<S>& g, const Matrix<S>& G) {
        const auto& Q = g.value(iq);
        const auto& K = g.value(ik);
        const auto& V = g.value(iv);
        Matrix<S> dQ = Matrix<S>::Zero(Q.rows(), Q.cols());
        Matrix<S> dK = Matrix<S>::Zero(K.rows(), K.cols());
        Matrix<S> dV = Matrix<S>::Zero(V.rows(), V.cols());
        for (int h = 0; h < heads; ++h) {
          const Matrix<S>& P = probs[static_cast<std::size_t>(h)];
          const auto Gh = G.middleRows(h * dv, dv);
          dV.middleRows(h * dv, dv) = Gh * P.transpose();
          Matrix<S> dP = V.middleRows(h * dv, dv).transpose() * Gh;
          Matrix<S> PdP = P.cwiseProduct(dP);
          const Eigen::Matrix<S, 1, Eigen::Dynamic> dots = PdP.colwise().sum();
          Matrix<S> dS = (PdP - (P.array().rowwise() * dots.array()).matrix()) * inv_sqrt;
          dQ.middleRows(h * dk, dk) = K.middleRows(h * dk, dk) * dS;
          dK.middleRows(h * dk, dk) = Q.middleRows(h * dk, dk) * dS.transpose();
        }
        g.accumulate(iq, dQ);
        g.accumulate(ik, dK);
        g.accumulate(iv, dV);
      },
      "multihead_attention");
}

/// RBF kernel pooling of a similarity matrix m (rows: query terms, cols:
/// document terms). For kernel k:
///   phi_k = sum_i log(max(sum_j exp(-(m_ij - mu_k)^2 / (2 sigma_k^2)), floor))
/// over valid rows i and columns j. Output is n_kernels x 1.
template <typename S>
Var<S> kernel_pooling(Var<S> m, const std::vector<S>& mus, const std::vector<S>& sigmas, const Mask& row_mask = {},
                      const Mask& col_mask = {}, S floor = S(1e-10)) {
  const auto& M = m.value();
  if (mus.size() != sigmas.size()) throw ShapeError("kernel_pooling: mus/sigmas length mismatch");
  const auto nk = static_cast<Eigen::Index>(mus.size());
  Matrix<S> sums = Matrix<S>::Zero(M.rows(), nk);
  for (Eigen::Index kk = 0; kk < nk; ++kk) {
    const S mu = mus[static_cast<std::size_t>(kk)];
    const S den = S(2) * sigmas[static_cast<std::size_t>(kk)] * sigmas[static_cast<std::size_t>(kk)];
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      if (!mask_valid(row_mask, i)) continue;
      S s = 0;
      for (Eigen::Index j = 0; j < M.cols(); ++j) {
        if (!mask_valid(col_mask, j)) continue;
        const S d = M(i, j) - mu;
        s += std::exp(-d * d / den);
      }
      sums(i, kk) = s;
    }
  }
  Matrix<S> phi = Matrix<S>::Zero(nk, 1);
  for (Eigen::Index kk = 0; kk < nk; ++kk)
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      if (mask_valid(row_mask, i)) phi(kk, 0) += std::log(std::max(sums(i, kk), floor));
  const int im = m.id();
  return m.graph().record(
      std::move(phi), {m},
      [im, mus, sigmas, row_mask, col_mask, floor, sums = std::move(sums)](Graph<S>& g, const Matrix<S>& G) {
        const auto& M = g.value(im);
        Matrix<S> dM = Matrix<S>::Zero(M.rows(), M.cols());
        for (std::size_t kk = 0; kk < mus.size(); ++kk) {
          const S s2 = sigmas[kk] * sigmas[kk];
          for (Eigen::Index i = 0; i < M.rows(); ++i) {
            const S total = sums(i, static_cast<Eigen::Index>(kk));
            if (!mask_valid(row_mask, i) || !(total > floor)) continue;
            const S coef = G(static_cast<Eigen::Index>(kk), 0) / total;
            for (Eigen::Index j = 0; j < M.cols(); ++j) {
              if (!mask_valid(col_mask, j)) continue;
              const S d = M(i, j) - mus[kk];
              dM(i, j) += coef * std::exp(-d * d / (S(2) * s2)) * (-d / s2);
            }
          }
        }
        g.accumulate(im, dM);
      },
      "kernel_pooling");
}

/// Negative log-likelihood of entry 0 under a softmax over all entries of a
/// score vector (any orientation), via log-sum-exp.
template <typename S>
Var<S> group_nll(Var<S> scores) {
  const auto& X = scores.value();
  if (X.size() < 2) throw ShapeError("group_nll: need at least two scores, got " + shape_str(X));
  if (!X.allFinite()) throw NumericError("group_nll: non-finite score");
  const S mx = X.maxCoeff();
  const S lse = mx + std::log((X.array() - mx).exp().sum());
  const S loss = lse - X(0);
  const int is = scores.id();
  return scores.graph().record(
      Matrix<S>::Constant(1, 1, loss), {scores},
      [is, lse](Graph<S>& g, const Matrix<S>& G) {
        Matrix<S> d = (g.value(is).array() - lse).exp().matrix();
        d(0) -= S(1);
        g.accumulate(is, d * G(0, 0));
      },
      "group_nll");
}

template <typename S>
Var<S> operator+(Var<S> a, Var<S> b) {
  return add(a, b);
}
template <typename S>
Var<S> operator-(Var<S> a, Var<S> b) {
  return sub(a, b);
}
template <typename S>
Var<S> operator*(Var<S> a, Var<S> b) {
  return matmul(a, b);
}

}  // namespace user::ad
