#pragma once

#include <string>
#include <unordered_map>

#include "user/model/config.hpp"
#include "user/model/transformer.hpp"
#include "user/text/tokenizer.hpp"

namespace user {

/// Context-aware word matrix C (dim x M), pooled vector r (dim x 1) and the
/// validity mask over the M columns.
template <typename S>
struct TextEncoding {
  ad::Var<S> C;
  ad::Var<S> r;
  ad::Mask mask;
  bool empty = true;
};

template <typename S>
using TextCache = std::unordered_map<std::string, TextEncoding<S>>;

template <typename S>
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(ad::ParamStore<S>& store, const ModelConfig& cfg, std::size_t vocab_size, Rng& rng)
      : dim_(cfg.dim), max_len_(cfg.max_len) {
    emb_ = store.add("text.embedding", init::uniform<S>(static_cast<Eigen::Index>(vocab_size), cfg.dim, 0.05, rng));
    words_ = TransformerStack<S>(store, "text.transformer", {cfg.dim, cfg.heads, cfg.head_dim, cfg.ffn_dim},
                                 cfg.word_layers, rng);
    wv_ = store.add("text.attention.wv", init::xavier<S>(cfg.att_dim, cfg.dim, rng));
    bv_ = store.add("text.attention.bv", init::zeros<S>(cfg.att_dim, 1));
    qw_ = store.add("text.attention.qw", init::xavier<S>(cfg.att_dim, 1, rng));
  }

  int max_len() const { return max_len_; }

  ad::Var<S> embed(ad::Graph<S>& g, const std::vector<int>& ids) const { return ad::embedding(g.param(emb_), ids); }

  /// Self-attention block over the word columns. An input with no valid
  /// column yields zeros and raises a flag.
  ad::Var<S> word_transform(ad::Graph<S>& g, ad::Var<S> emb, const ad::Mask& mask) const {
    if (valid_count(mask, emb.cols()) == 0) {
      g.raise_flag();
      return g.constant(ad::Matrix<S>::Zero(dim_, emb.cols()));
    }
    return words_.forward(g, emb, mask);
  }

  /// Attention pooling r = C softmax(q_w^T tanh(W_v C + b_v))^T over valid columns.
  ad::Var<S> word_attention(ad::Graph<S>& g, ad::Var<S> C, const ad::Mask& mask) const {
    if (valid_count(mask, C.cols()) == 0) {
      g.raise_flag();
      return g.constant(ad::Matrix<S>::Zero(dim_, 1));
    }
    using namespace ad;
    auto h = tanh(add_bias(matmul(g.param(wv_), C), g.param(bv_)));
    auto alpha = softmax(matmul(transpose(g.param(qw_)), h), 1, mask);
    return matmul(C, transpose(alpha));
  }

  /// Encodes several texts in one pass: their columns are packed side by
  /// side and attention is confined to each text. Results equal encode()
  /// applied to each text.
  std::vector<TextEncoding<S>> encode_batch(ad::Graph<S>& g, const std::vector<TokenSeq>& seqs) const {
    std::vector<TextEncoding<S>> out(seqs.size());
    std::vector<int> ids;
    ad::Mask mask;
    ad::Segments seg{0};
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      if (seqs[i].valid() == 0) {
        out[i] = encode(g, seqs[i]);
        continue;
      }
      ids.insert(ids.end(), seqs[i].ids.begin(), seqs[i].ids.end());
      mask.insert(mask.end(), seqs[i].mask.begin(), seqs[i].mask.end());
      seg.push_back(static_cast<Eigen::Index>(ids.size()));
      members.push_back(i);
    }
    if (members.empty()) return out;
    using namespace ad;
    auto C = words_.forward(g, embed(g, ids), mask, &seg);
    auto h = tanh(add_bias(matmul(g.param(wv_), C), g.param(bv_)));
    auto alpha = segmented_softmax(matmul(transpose(g.param(qw_)), h), seg, mask);
    auto R = segment_sum(C, alpha, seg);
    for (std::size_t k = 0; k < members.size(); ++k) {
      auto& enc = out[members[k]];
      enc.mask = seqs[members[k]].mask;
      enc.empty = false;
      enc.C = members.size() == 1 ? C : slice_cols(C, seg[k], seg[k + 1] - seg[k]);
      enc.r = column(R, static_cast<Eigen::Index>(k));
    }
    return out;
  }

  TextEncoding<S> encode(ad::Graph<S>& g, const TokenSeq& seq) const {
    TextEncoding<S> out;
    out.mask = seq.mask;
    out.empty = seq.valid() == 0;
    if (out.empty) {
      g.raise_flag();
      const Eigen::Index m = static_cast<Eigen::Index>(seq.ids.size());
      out.C = g.constant(ad::Matrix<S>::Zero(dim_, m));
      out.r = g.constant(ad::Matrix<S>::Zero(dim_, 1));
      return out;
    }
    out.C = word_transform(g, embed(g, seq.ids), seq.mask);
    out.r = word_attention(g, out.C, seq.mask);
    return out;
  }

 private:
  static std::size_t valid_count(const ad::Mask& mask, Eigen::Index n) {
    if (mask.empty()) return static_cast<std::size_t>(n);
    std::size_t c = 0;
    for (bool b : mask) c += b ? 1 : 0;
    return c;
  }

  int dim_ = 0;
  int max_len_ = kMaxTextLength;
  ad::ParamId emb_, wv_, bv_, qw_;
  TransformerStack<S> words_;
};

}  // namespace user
