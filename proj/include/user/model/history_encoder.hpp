#pragma once

#include <vector>

#include "user/model/session_encoder.hpp"

namespace user {

/// Contextualized long-term behaviors, oldest first, as the columns of a
/// dim x n matrix. Masked columns are padding and are ignored by fusion.
template <typename S>
struct HistorySequence {
  ad::Var<S> vectors;
  ad::Mask mask;

  int columns() const { return vectors.defined() ? static_cast<int>(vectors.cols()) : 0; }
  int length() const {
    int n = 0;
    for (bool b : mask) n += b ? 1 : 0;
    return n;
  }
};

/// Appends `n` masked zero columns.
template <typename S>
HistorySequence<S> pad_history(ad::Graph<S>& g, HistorySequence<S> h, int n, Eigen::Index dim) {
  if (n <= 0) return h;
  auto zeros = g.constant(ad::Matrix<S>::Zero(dim, n));
  h.vectors = h.vectors.defined() ? ad::concat_cols(std::vector<ad::Var<S>>{h.vectors, zeros}) : zeros;
  h.mask.insert(h.mask.end(), static_cast<std::size_t>(n), false);
  return h;
}

template <typename S>
class HistoryEncoder {
 public:
  HistoryEncoder() = default;
  HistoryEncoder(ad::ParamStore<S>& store, const ModelConfig& cfg, Rng& rng) : max_items_(cfg.history_positions() - 1) {
    pos_ = store.add("history.position", init::uniform<S>(cfg.history_positions(), cfg.dim, 0.05, rng));
    block_ = TransformerStack<S>(store, "history.transformer", {cfg.dim, cfg.heads, cfg.head_dim, cfg.ffn_dim},
                                 cfg.history_layers, rng);
  }

  /// Runs the session transformer over each historical session separately
  /// and concatenates the per-behavior outputs chronologically.
  HistorySequence<S> encode(ad::Graph<S>& g, const SessionEncoder<S>& sessions,
                            const std::vector<std::vector<BehaviorVector<S>>>& long_term) const {
    std::vector<ad::Var<S>> parts;
    HistorySequence<S> out;
    for (const auto& items : long_term) {
      if (items.empty()) continue;
      parts.push_back(sessions.transform(g, items, std::nullopt).behavior_outputs());
      out.mask.insert(out.mask.end(), items.size(), true);
    }
    if (out.mask.size() > static_cast<std::size_t>(max_items_))
      throw Error("encode_history: " + std::to_string(out.mask.size()) + " behaviors exceed the history limit " +
                  std::to_string(max_items_));
    if (!parts.empty()) out.vectors = parts.size() == 1 ? parts[0] : ad::concat_cols(parts);
    return out;
  }

  /// Last-position output of the history transformer over [H, x] with
  /// position embeddings. Positions count valid columns only, so padding
  /// does not shift them.
  ad::Var<S> fuse(ad::Graph<S>& g, const HistorySequence<S>& h, ad::Var<S> x) const {
    using namespace ad;
    std::vector<int> pos;
    Mask mask;
    int rank = 0;
    for (bool valid : h.mask) {
      pos.push_back(valid ? rank : 0);
      rank += valid ? 1 : 0;
      mask.push_back(valid);
    }
    pos.push_back(rank);
    mask.push_back(true);
    auto seq = h.columns() > 0 ? concat_cols(std::vector<Var<S>>{h.vectors, x}) : x;
    seq = add(seq, embedding(g.param(pos_), pos));
    auto out = block_.forward(g, seq, mask);
    return column(out, out.cols() - 1);
  }

 private:
  int max_items_ = 100;
  ad::ParamId pos_;
  TransformerStack<S> block_;
};

}  // namespace user
