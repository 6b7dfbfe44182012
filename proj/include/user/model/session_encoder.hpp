#pragma once

#include <optional>
#include <string>
#include <vector>

#include "user/log/types.hpp"
#include "user/model/config.hpp"
#include "user/model/text_encoder.hpp"

namespace user {

template <typename S>
struct BehaviorVector {
  ad::Var<S> vec;  // dim x 1
  BehaviorKind kind = BehaviorKind::Browse;
  int position = 0;
};

template <typename S>
struct SessionOutput {
  ad::Var<S> outputs;  // dim x (n + has_target), one column per input position
  ad::Var<S> target;   // last column when a target was appended
  int behaviors = 0;

  /// Per-behavior outputs (excludes the target slot); undefined when empty.
  ad::Var<S> behavior_outputs() const {
    if (behaviors == 0) return {};
    if (!target.defined()) return outputs;
    return ad::slice_cols(outputs, 0, behaviors);
  }
};

inline int type_index(BehaviorKind k) { return k == BehaviorKind::Search ? 0 : 1; }

template <typename S>
class SessionEncoder {
 public:
  SessionEncoder() = default;
  SessionEncoder(ad::ParamStore<S>& store, const ModelConfig& cfg, std::size_t n_user_rows, Rng& rng)
      : max_len_(cfg.max_session_len) {
    const int d = cfg.dim, k = cfg.coattention_dim();
    user_emb_ = store.add("session.user_embedding", init::uniform<S>(static_cast<Eigen::Index>(n_user_rows), d, 0.05, rng));
    wl_ = store.add("session.coatt.wl", init::xavier<S>(d, d, rng));
    wq_ = store.add("session.coatt.wq", init::xavier<S>(k, d, rng));
    wd_ = store.add("session.coatt.wd", init::xavier<S>(k, d, rng));
    whq_ = store.add("session.coatt.whq", init::xavier<S>(k, 1, rng));
    whd_ = store.add("session.coatt.whd", init::xavier<S>(k, 1, rng));
    wf_ = store.add("session.fusion.w", init::xavier<S>(d, 2 * d, rng));
    bf_ = store.add("session.fusion.b", init::zeros<S>(d, 1));
    pos_ = store.add("session.position", init::uniform<S>(cfg.max_session_len + 1, d, 0.05, rng));
    type_ = store.add("session.type", init::uniform<S>(2, d, 0.05, rng));
    block_ = TransformerStack<S>(store, "session.transformer", {d, cfg.heads, cfg.head_dim, cfg.ffn_dim},
                                 cfg.session_layers, rng);
  }

  int max_session_len() const { return max_len_; }

  /// Target intent: the pooled query for search, the user's embedding row
  /// (row 0 for unknown users) for recommendation.
  ad::Var<S> select_gate(ad::Graph<S>& g, Task task, const TextEncoding<S>* query, int user_row) const {
    if (task == Task::Search) {
      if (!query) throw Error("select_gate: search target without a query encoding");
      return query->r;
    }
    return ad::embedding(g.param(user_emb_), {user_row});
  }

  struct CoAttention {
    ad::Var<S> rq, rd;  // dim x 1 each
    ad::Var<S> att_q, att_d;  // attention rows, 1 x Mq and 1 x Md
  };

  CoAttention coattention(ad::Graph<S>& g, ad::Var<S> cq, const ad::Mask& mq, ad::Var<S> cd,
                          const ad::Mask& md) const {
    if (cd.cols() == 0) throw Error("coattention: search behavior without clicked documents");
    using namespace ad;
    auto a = tanh(matmul(matmul(transpose(cq), g.param(wl_)), cd));  // Mq x Md
    auto pq = matmul(g.param(wq_), cq);
    auto pd = matmul(g.param(wd_), cd);
    auto hq = tanh(add(pq, matmul(pd, transpose(a))));
    auto hd = tanh(add(pd, matmul(pq, a)));
    CoAttention out;
    out.att_q = softmax(matmul(transpose(g.param(whq_)), hq), 1, mq);
    out.att_d = softmax(matmul(transpose(g.param(whd_)), hd), 1, md);
    out.rq = matmul(cq, transpose(out.att_q));
    out.rd = matmul(cd, transpose(out.att_d));
    return out;
  }

  /// tanh(W_f [rq; rd] + b_f)
  ad::Var<S> fuse(ad::Graph<S>& g, ad::Var<S> rq, ad::Var<S> rd) const {
    return ad::tanh(ad::add_bias(ad::matmul(g.param(wf_), ad::concat_rows(std::vector<ad::Var<S>>{rq, rd})),
                                 g.param(bf_)));
  }

  /// Search representation from the query encoding and its clicked documents.
  ad::Var<S> encode_search(ad::Graph<S>& g, const TextEncoding<S>& query,
                           const std::vector<const TextEncoding<S>*>& clicked) const {
    if (clicked.empty()) throw Error("encode_search: search behavior without clicked documents");
    std::vector<ad::Var<S>> cols;
    ad::Mask md;
    for (const auto* c : clicked) {
      cols.push_back(c->C);
      md.insert(md.end(), c->mask.begin(), c->mask.end());
    }
    auto cd = cols.size() == 1 ? cols[0] : ad::concat_cols(cols);
    auto co = coattention(g, query.C, query.mask, cd, md);
    return fuse(g, co.rq, co.rd);
  }

  /// Transformer over [behaviors, target] plus position and type embeddings.
  SessionOutput<S> transform(ad::Graph<S>& g, const std::vector<BehaviorVector<S>>& items,
                             std::optional<std::pair<ad::Var<S>, BehaviorKind>> target) const {
    if (items.size() > static_cast<std::size_t>(max_len_))
      throw Error("session_transform: " + std::to_string(items.size()) + " behaviors exceed the session limit " +
                  std::to_string(max_len_));
    SessionOutput<S> out;
    out.behaviors = static_cast<int>(items.size());
    std::vector<ad::Var<S>> cols;
    std::vector<int> pos, types;
    for (std::size_t i = 0; i < items.size(); ++i) {
      cols.push_back(items[i].vec);
      pos.push_back(static_cast<int>(i));
      types.push_back(type_index(items[i].kind));
    }
    if (target) {
      cols.push_back(target->first);
      pos.push_back(static_cast<int>(items.size()));
      types.push_back(type_index(target->second));
    }
    if (cols.empty()) throw Error("session_transform: nothing to encode");
    using namespace ad;
    auto x = cols.size() == 1 ? cols[0] : concat_cols(cols);
    x = add(add(x, embedding(g.param(pos_), pos)), embedding(g.param(type_), types));
    out.outputs = block_.forward(g, x);
    if (target) out.target = column(out.outputs, static_cast<Eigen::Index>(cols.size() - 1));
    return out;
  }

 private:
  int max_len_ = 5;
  ad::ParamId user_emb_, wl_, wq_, wd_, whq_, whd_, wf_, bf_, pos_, type_;
  TransformerStack<S> block_;
};

}  // namespace user
