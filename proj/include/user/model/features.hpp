#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "user/log/types.hpp"

namespace user {

/// Document frequencies of title tokens, for TF-IDF weighting.
class TermStats {
 public:
  TermStats() = default;
  explicit TermStats(const std::vector<Document>& docs);

  /// Smoothed inverse document frequency: log((N + 1) / (df + 1)) + 1.
  double idf(const std::string& token) const;
  std::size_t doc_count() const { return n_docs_; }

  void save(const std::filesystem::path& path) const;
  static TermStats load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, std::size_t> df_;
  std::size_t n_docs_ = 0;
};

/// Handcrafted query-document features for search:
///   [0] fraction of distinct query tokens present in the title
///   [1] TF-IDF cosine between query and title
///   [2] log1p(number of past searches with the same query that sat-clicked the doc)
///   [3] 1 if the doc was browsed or clicked anywhere in the history, else 0
/// Recommendation (empty query) yields all zeros.
FeatureVector relevance_features(const std::string& query, const Document& candidate, const UserHistory& history,
                                 const TermStats& stats);

}  // namespace user
