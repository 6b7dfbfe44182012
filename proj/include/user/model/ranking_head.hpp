#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "user/log/types.hpp"
#include "user/model/config.hpp"
#include "user/model/init.hpp"
#include "user/numerics/ops.hpp"

namespace user {

inline constexpr int kKernelCount = 11;
inline constexpr int kHeadInputs = 5 + static_cast<int>(kFeatureCount);

/// Exact-match kernel first, then ten soft kernels over [-0.9, 0.9].
template <typename S>
std::vector<S> kernel_mus() {
  std::vector<S> mus{S(1)};
  for (int k = 0; k < kKernelCount - 1; ++k) mus.push_back(static_cast<S>(-0.9 + 0.2 * k));
  return mus;
}

template <typename S>
std::vector<S> kernel_sigmas() {
  std::vector<S> s{static_cast<S>(1e-3)};
  s.resize(kKernelCount, static_cast<S>(0.1));
  return s;
}

/// Everything the head reads. C_Q, C_D and the features are search-only.
template <typename S>
struct ScoreInputs {
  Task task = Task::Search;
  ad::Var<S> intent_s, intent_l;  // I^s, I^l
  ad::Var<S> doc, doc_l;          // r^D, r^D_l
  ad::Var<S> cq, cd;
  ad::Mask mq, md;
  FeatureVector features{};
};

template <typename S>
class RankingHead {
 public:
  RankingHead() = default;
  RankingHead(ad::ParamStore<S>& store, const ModelConfig&, Rng& rng)
      : mus_(kernel_mus<S>()), sigmas_(kernel_sigmas<S>()) {
    knrm_w_ = store.add("head.knrm.w", init::uniform<S>(kKernelCount, 1, 0.01, rng));
    w_ = store.add("head.w", init::xavier<S>(1, kHeadInputs, rng));
    b_ = store.add("head.b", init::zeros<S>(1, 1));
  }

  /// Kernel-pooled cosine interactions, combined linearly to a 1x1 score.
  ad::Var<S> knrm(ad::Graph<S>& g, ad::Var<S> cq, const ad::Mask& mq, ad::Var<S> cd, const ad::Mask& md) const {
    using namespace ad;
    auto m = matmul(transpose(normalize_cols(cq)), normalize_cols(cd));
    auto phi = kernel_pooling(m, mus_, sigmas_, mq, md);
    return matmul(transpose(g.param(knrm_w_)), phi);
  }

  /// The nine head inputs as a column: four cosines, knrm, then features.
  ad::Var<S> head_inputs(ad::Graph<S>& g, const ScoreInputs<S>& in) const {
    using namespace ad;
    std::vector<Var<S>> f{cosine_similarity(in.intent_s, in.doc), cosine_similarity(in.intent_l, in.doc),
                          cosine_similarity(in.intent_s, in.doc_l), cosine_similarity(in.intent_l, in.doc_l)};
    Matrix<S> feats = Matrix<S>::Zero(static_cast<Eigen::Index>(kFeatureCount), 1);
    if (in.task == Task::Search) {
      f.push_back(knrm(g, in.cq, in.mq, in.cd, in.md));
      for (std::size_t i = 0; i < kFeatureCount; ++i) feats(static_cast<Eigen::Index>(i), 0) = static_cast<S>(in.features[i]);
    } else {
      f.push_back(g.constant(Matrix<S>::Zero(1, 1)));
    }
    f.push_back(g.constant(std::move(feats)));
    return concat_rows(f);
  }

  ad::Var<S> score(ad::Graph<S>& g, const ScoreInputs<S>& in) const {
    return ad::add(ad::matmul(g.param(w_), head_inputs(g, in)), g.param(b_));
  }

  const std::vector<S>& mus() const { return mus_; }
  const std::vector<S>& sigmas() const { return sigmas_; }
  ad::ParamId head_weights() const { return w_; }
  ad::ParamId head_bias() const { return b_; }
  ad::ParamId knrm_weights() const { return knrm_w_; }

 private:
  std::vector<S> mus_, sigmas_;
  ad::ParamId knrm_w_, w_, b_;
};

struct RankedCandidate {
  std::size_t index = 0;
  std::string doc_id;
  double score = 0.0;
};

/// Descending score, ties by doc id ascending.
std::vector<RankedCandidate> rank_candidates(const std::vector<Document>& candidates, const std::vector<double>& scores);

}  // namespace user
