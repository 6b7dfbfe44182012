#pragma once

// Ops over several independent sequences packed side by side as column
// ranges of one matrix. `Segments` holds the boundaries: segment s spans
// columns [seg[s], seg[s+1]).

#include "user/numerics/ops.hpp"

namespace user::ad {

using Segments = std::vector<Eigen::Index>;

namespace detail {

inline void check_segments(const Segments& seg, Eigen::Index cols, const char* op) {
  bool ok = seg.size() >= 2 && seg.front() == 0 && seg.back() == cols;
  for (std::size_t s = 1; ok && s < seg.size(); ++s) ok = seg[s] >= seg[s - 1];
  if (!ok) throw ShapeError(std::string(op) + ": segment boundaries do not cover " + std::to_string(cols) + " columns");
}

inline Mask sub_mask(const Mask& m, Eigen::Index start, Eigen::Index n) {
  if (m.empty()) return {};
  return Mask(m.begin() + start, m.begin() + start + n);
}

}  // namespace detail

/// Self-attention restricted to each segment: query column j attends over
/// the valid key columns of its own segment only. Equivalent to running
/// multihead_attention on every segment separately.
template <typename S>
Var<S> segmented_attention(Var<S> q, Var<S> k, Var<S> v, int heads, const Segments& seg, const Mask& key_mask = {}) {
  const auto& Q = q.value();
  const auto& K = k.value();
  const auto& V = v.value();
  if (heads <= 0 || Q.rows() % heads != 0 || Q.rows() != K.rows() || V.rows() % heads != 0 || K.cols() != V.cols() ||
      Q.cols() != K.cols())
    throw ShapeError("segmented_attention: shape mismatch q " + shape_str(Q) + " k " + shape_str(K) + " v " +
                     shape_str(V));
  if (!key_mask.empty() && static_cast<Eigen::Index>(key_mask.size()) != K.cols())
    throw ShapeError("segmented_attention: key mask length mismatch");
  detail::check_segments(seg, Q.cols(), "segmented_attention");
  const Eigen::Index dk = Q.rows() / heads, dv = V.rows() / heads;
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dk));
  auto& graph = q.graph();
  const std::size_t n_seg = seg.size() - 1;
  std::vector<Matrix<S>> probs(n_seg * static_cast<std::size_t>(heads));
  Matrix<S> out(V.rows(), Q.cols());
  for (std::size_t s = 0; s < n_seg; ++s) {
    const Eigen::Index b = seg[s], n = seg[s + 1] - seg[s];
    if (n == 0) continue;
    const Mask m = detail::sub_mask(key_mask, b, n);
    for (int h = 0; h < heads; ++h) {
      Matrix<S> scores = (K.block(h * dk, b, dk, n).transpose() * Q.block(h * dk, b, dk, n)) * inv_sqrt;
      Matrix<S>& P = probs[s * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h)];
      P.resize(n, n);
      for (Eigen::Index j = 0; j < n; ++j)
        if (!detail::masked_softmax<S>(scores.col(j), m, P.col(j))) graph.raise_flag();
      out.block(h * dv, b, dv, n) = V.block(h * dv, b, dv, n) * P;
    }
  }
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return graph.record(
      std::move(out), {q, k, v},
      [iq, ik, iv, heads, dk, dv, inv_sqrt, seg, probs = std::move(probs)](Graph<S>& g, const Matrix<S>& G) {
        const auto& Q = g.value(iq);
        const auto& K = g.value(ik);
        const auto& V = g.value(iv);
        Matrix<S> dQ(Q.rows(), Q.cols()), dK(K.rows(), K.cols()), dV(V.rows(), V.cols());
        for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
          const Eigen::Index b = seg[s], n = seg[s + 1] - seg[s];
          if (n == 0) continue;
          for (int h = 0; h < heads; ++h) {
            const Matrix<S>& P = probs[s * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h)];
            const auto Gh = G.block(h * dv, b, dv, n);
            dV.block(h * dv, b, dv, n).noalias() = Gh * P.transpose();
            Matrix<S> dP = V.block(h * dv, b, dv, n).transpose() * Gh;
            Matrix<S> PdP = P.cwiseProduct(dP);
            const Eigen::Matrix<S, 1, Eigen::Dynamic> dots = PdP.colwise().sum();
            Matrix<S> dS = (PdP - (P.array().rowwise() * dots.array()).matrix()) * inv_sqrt;
            dQ.block(h * dk, b, dk, n).noalias() = K.block(h * dk, b, dk, n) * dS;
            dK.block(h * dk, b, dk, n).noalias() = Q.block(h * dk, b, dk, n) * dS.transpose();
          }
        }
        g.accumulate(iq, dQ);
        g.accumulate(ik, dK);
        g.accumulate(iv, dV);
      },
      "segmented_attention");
}

/// Softmax of a 1 x T row within each segment over valid entries.
template <typename S>
Var<S> segmented_softmax(Var<S> a, const Segments& seg, const Mask& mask = {}) {
  const auto& A = a.value();
  if (A.rows() != 1) throw ShapeError("segmented_softmax: expected a row, got " + shape_str(A));
  if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != A.cols())
    throw ShapeError("segmented_softmax: mask length mismatch");
  detail::check_segments(seg, A.cols(), "segmented_softmax");
  Matrix<S> Y = Matrix<S>::Zero(1, A.cols());
  auto& graph = a.graph();
  for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
    const Eigen::Index b = seg[s], n = seg[s + 1] - seg[s];
    if (n == 0) continue;
    if (!detail::masked_softmax<S>(A.middleCols(b, n), detail::sub_mask(mask, b, n), Y.middleCols(b, n)))
      graph.raise_flag();
  }
  const int ia = a.id();
  const int oid = static_cast<int>(graph.size());
  return graph.record(
      std::move(Y), {a},
      [ia, oid, seg](Graph<S>& g, const Matrix<S>& G) {
        const auto& Y = g.value(oid);
        Matrix<S> D = G.cwiseProduct(Y);
        for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
          const Eigen::Index b = seg[s], n = seg[s + 1] - seg[s];
          if (n == 0) continue;
          const S dot = D.middleCols(b, n).sum();
          D.middleCols(b, n) -= dot * Y.middleCols(b, n);
        }
        g.accumulate(ia, D);
      },
      "segmented_softmax");
}

/// Per-segment weighted column sums: out[:, s] = sum over j in s of w(j) c[:, j].
template <typename S>
Var<S> segment_sum(Var<S> c, Var<S> w, const Segments& seg) {
  const auto& C = c.value();
  const auto& W = w.value();
  if (W.rows() != 1 || W.cols() != C.cols())
    throw ShapeError("segment_sum: weights " + shape_str(W) + " vs columns " + shape_str(C));
  detail::check_segments(seg, C.cols(), "segment_sum");
  const auto n_seg = static_cast<Eigen::Index>(seg.size() - 1);
  Matrix<S> out = Matrix<S>::Zero(C.rows(), n_seg);
  for (Eigen::Index s = 0; s < n_seg; ++s) {
    const Eigen::Index b = seg[static_cast<std::size_t>(s)], n = seg[static_cast<std::size_t>(s) + 1] - b;
    if (n > 0) out.col(s).noalias() = C.middleCols(b, n) * W.middleCols(b, n).transpose();
  }
  const int ic = c.id(), iw = w.id();
  return c.graph().record(
      std::move(out), {c, w},
      [ic, iw, seg](Graph<S>& g, const Matrix<S>& G) {
        const auto& C = g.value(ic);
        const auto& W = g.value(iw);
        const bool need_c = g.requires_grad(ic), need_w = g.requires_grad(iw);
        Matrix<S> dC, dW;
        if (need_c) dC.resize(C.rows(), C.cols());
        if (need_w) dW.resize(1, C.cols());
        for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
          const Eigen::Index b = seg[s], n = seg[s + 1] - b;
          if (n == 0) continue;
          const auto gs = G.col(static_cast<Eigen::Index>(s));
          if (need_c) dC.middleCols(b, n).noalias() = gs * W.middleCols(b, n);
          if (need_w) dW.middleCols(b, n).noalias() = gs.transpose() * C.middleCols(b, n);
        }
        if (need_c) g.accumulate(ic, dC);
        if (need_w) g.accumulate(iw, dW);
      },
      "segment_sum");
}

}  // namespace user::ad
