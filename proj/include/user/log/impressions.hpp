#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "user/log/corpus.hpp"
#include "user/log/types.hpp"

namespace user {

struct PseudoNegativeOptions {
  double alpha = 0.5;       // weight of normalized popularity vs topic similarity
  std::size_t n_neg = 9;
};

/// Ranks corpus documents other than `browsed` by
///   alpha * popularity_norm(d) + (1 - alpha) * cos(topic(d), topic(browsed))
/// and returns the indices of the top `n_neg` (ties by ascending doc id).
std::vector<std::size_t> rank_pseudo_negatives(const Document& browsed, const Corpus& corpus,
                                               const PseudoNegativeOptions& opt = {});

/// Recommendation impression for a browse: the browsed doc (label 1) plus its
/// pseudo negatives, in seeded shuffled order. History is left empty.
Impression build_recommend_impression(const Document& browsed, const Corpus& corpus, std::uint64_t seed,
                                      const PseudoNegativeOptions& opt = {});

/// Search impression over the logged results with sat-click labels; nullopt
/// when no result is sat-clicked.
std::optional<Impression> build_search_impression(const Behavior& search, const UserHistory& history);

/// One group per positive; K negatives drawn without replacement from the
/// zero-labeled candidates, or with replacement when fewer than K exist.
std::vector<TrainingGroup> make_training_groups(const Impression& imp, std::size_t k, std::uint64_t seed);

/// Keeps only behaviors of `kind` in a history (sessions left empty are dropped).
UserHistory filter_history(const UserHistory& h, BehaviorKind kind);

}  // namespace user
