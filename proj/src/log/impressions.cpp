#include "user/log/impressions.hpp"

#include <algorithm>
#include <numeric>

#include "user/common/error.hpp"
#include "user/common/rng.hpp"
#include "user/log/sessions.hpp"

namespace user {

std::vector<std::size_t> rank_pseudo_negatives(const Document& browsed, const Corpus& corpus,
                                               const PseudoNegativeOptions& opt) {
  const auto& docs = corpus.docs();
  std::size_t others = 0;
  for (const auto& d : docs) others += d.id != browsed.id ? 1 : 0;
  if (others < opt.n_neg)
    throw Error("pseudo negatives: corpus has " + std::to_string(others) + " other documents, need " +
                std::to_string(opt.n_neg));
  const Eigen::VectorXd target = corpus.topic_vec(browsed);
  const Eigen::VectorXd sims = corpus.topic_matrix() * target;
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].id == browsed.id) continue;
    scored.emplace_back(opt.alpha * corpus.popularity_norm(i) + (1.0 - opt.alpha) * sims(static_cast<Eigen::Index>(i)),
                        i);
  }
  auto better = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return docs[a.second].id < docs[b.second].id;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(opt.n_neg), scored.end(), better);
  std::vector<std::size_t> out;
  out.reserve(opt.n_neg);
  for (std::size_t i = 0; i < opt.n_neg; ++i) out.push_back(scored[i].second);
  return out;
}

Impression build_recommend_impression(const Document& browsed, const Corpus& corpus, std::uint64_t seed,
                                      const PseudoNegativeOptions& opt) {
  Impression imp;
  imp.task = Task::Recommend;
  imp.candidates.push_back(browsed);
  imp.labels.push_back(1);
  for (auto i : rank_pseudo_negatives(browsed, corpus, opt)) {
    imp.candidates.push_back(corpus.docs()[i]);
    imp.labels.push_back(0);
  }
  std::vector<std::size_t> order(imp.candidates.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<Document> cands;
  std::vector<int> labels;
  for (auto i : order) {
    cands.push_back(std::move(imp.candidates[i]));
    labels.push_back(imp.labels[i]);
  }
  imp.candidates = std::move(cands);
  imp.labels = std::move(labels);
  imp.features.assign(imp.candidates.size(), FeatureVector{});
  return imp;
}

std::optional<Impression> build_search_impression(const Behavior& search, const UserHistory& history) {
  if (!search.is_search()) throw Error("build_search_impression: behavior is not a search");
  Impression imp;
  imp.task = Task::Search;
  imp.user = search.user;
  imp.ts = search.ts;
  imp.query = search.query;
  imp.history = history;
  for (const auto& r : search.results) {
    imp.candidates.push_back(r.doc);
    imp.labels.push_back(label_sat_click(r.clicked, r.dwell));
  }
  if (imp.positives() == 0) return std::nullopt;
  imp.features.assign(imp.candidates.size(), FeatureVector{});
  return imp;
}

std::vector<TrainingGroup> make_training_groups(const Impression& imp, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < imp.labels.size(); ++i) (imp.labels[i] > 0 ? pos : neg).push_back(i);
  if (pos.empty()) throw Error("make_training_groups: impression " + imp.id + " has no positive");
  if (neg.empty()) throw Error("make_training_groups: impression " + imp.id + " has no negative");
  if (k == 0) throw Error("make_training_groups: K must be at least 1");
  Rng rng(seed);
  std::vector<TrainingGroup> groups;
  for (auto p : pos) {
    TrainingGroup g;
    g.positive = p;
    if (neg.size() >= k) {
      std::vector<std::size_t> pool = neg;
      // Partial Fisher-Yates: first k entries become a uniform sample.
      for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
      g.negatives.assign(pool.begin(), pool.begin() + static_cast<long>(k));
    } else {
      for (std::size_t i = 0; i < k; ++i) g.negatives.push_back(neg[rng.index(neg.size())]);
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

UserHistory filter_history(const UserHistory& h, BehaviorKind kind) {
  UserHistory out;
  for (const auto& s : h.long_term) {
    Session kept;
    for (const auto& b : s.behaviors)
      if (b.kind == kind) kept.behaviors.push_back(b);
    if (!kept.behaviors.empty()) out.long_term.push_back(std::move(kept));
  }
  for (const auto& b : h.current.behaviors)
    if (b.kind == kind) out.current.behaviors.push_back(b);
  return out;
}

}  // namespace user
