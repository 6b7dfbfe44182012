#pragma once

#include <string>

#include "user/model/init.hpp"
#include "user/numerics/segment_ops.hpp"

namespace user {

struct TransformerShape {
  int dim = 100;
  int heads = 4;
  int head_dim = 25;
  int ffn_dim = 50;
};

/// Post-norm transformer encoder block over the columns of a dim x n input:
///   y = LayerNorm(x + Wo * MHA(x) + bo)
///   z = LayerNorm(y + W2 * relu(W1 * y + b1) + b2)
/// Masked columns are excluded as attention keys. With `seg`, attention is
/// confined to each segment of columns.
template <typename S>
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(ad::ParamStore<S>& store, const std::string& prefix, const TransformerShape& shape, Rng& rng)
      : heads_(shape.heads) {
    const int inner = shape.heads * shape.head_dim;
    wq_ = store.add(prefix + ".wq", init::xavier<S>(inner, shape.dim, rng));
    wk_ = store.add(prefix + ".wk", init::xavier<S>(inner, shape.dim, rng));
    wv_ = store.add(prefix + ".wv", init::xavier<S>(inner, shape.dim, rng));
    wo_ = store.add(prefix + ".wo", init::xavier<S>(shape.dim, inner, rng));
    bo_ = store.add(prefix + ".bo", init::zeros<S>(shape.dim, 1));
    ln1_g_ = store.add(prefix + ".ln1.gain", init::ones<S>(shape.dim, 1));
    ln1_b_ = store.add(prefix + ".ln1.bias", init::zeros<S>(shape.dim, 1));
    w1_ = store.add(prefix + ".ffn.w1", init::xavier<S>(shape.ffn_dim, shape.dim, rng));
    b1_ = store.add(prefix + ".ffn.b1", init::zeros<S>(shape.ffn_dim, 1));
    w2_ = store.add(prefix + ".ffn.w2", init::xavier<S>(shape.dim, shape.ffn_dim, rng));
    b2_ = store.add(prefix + ".ffn.b2", init::zeros<S>(shape.dim, 1));
    ln2_g_ = store.add(prefix + ".ln2.gain", init::ones<S>(shape.dim, 1));
    ln2_b_ = store.add(prefix + ".ln2.bias", init::zeros<S>(shape.dim, 1));
  }

  ad::Var<S> forward(ad::Graph<S>& g, ad::Var<S> x, const ad::Mask& mask = {},
                     const ad::Segments* seg = nullptr) const {
    using namespace ad;
    auto q = matmul(g.param(wq_), x);
    auto k = matmul(g.param(wk_), x);
    auto v = matmul(g.param(wv_), x);
    auto mixed = seg ? segmented_attention(q, k, v, heads_, *seg, mask) : multihead_attention(q, k, v, heads_, mask);
    auto att = add_bias(matmul(g.param(wo_), mixed), g.param(bo_));
    auto y = layer_norm(add(x, att), g.param(ln1_g_), g.param(ln1_b_));
    auto h = relu(add_bias(matmul(g.param(w1_), y), g.param(b1_)));
    auto f = add_bias(matmul(g.param(w2_), h), g.param(b2_));
    return layer_norm(add(y, f), g.param(ln2_g_), g.param(ln2_b_));
  }

 private:
  int heads_ = 1;
  ad::ParamId wq_, wk_, wv_, wo_, bo_, ln1_g_, ln1_b_, w1_, b1_, w2_, b2_, ln2_g_, ln2_b_;
};

/// A stack of identical blocks.
template <typename S>
class TransformerStack {
 public:
  TransformerStack() = default;
  TransformerStack(ad::ParamStore<S>& store, const std::string& prefix, const TransformerShape& shape, int layers,
                   Rng& rng) {
    for (int l = 0; l < layers; ++l)
      blocks_.emplace_back(store, layers == 1 ? prefix : prefix + "." + std::to_string(l), shape, rng);
  }

  ad::Var<S> forward(ad::Graph<S>& g, ad::Var<S> x, const ad::Mask& mask = {},
                     const ad::Segments* seg = nullptr) const {
    for (const auto& b : blocks_) x = b.forward(g, x, mask, seg);
    return x;
  }

 private:
  std::vector<TransformerBlock<S>> blocks_;
};

}  // namespace user
