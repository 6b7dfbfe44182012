#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "user/log/types.hpp"

namespace user {

// Ranking metrics over 0/1 labels listed in rank order (rank 1 first). All
// of them require at least one positive and throw otherwise.

double metric_map(const std::vector<int>& ranked);
double metric_mrr(const std::vector<int>& ranked);
double metric_p1(const std::vector<int>& ranked);
/// Mean 1-based rank of the positives.
double metric_avgc(const std::vector<int>& ranked);
/// Binary-gain NDCG truncated at k, log base 2.
double metric_ndcg(const std::vector<int>& ranked, std::size_t k);
/// P(score+ > score-) + P(tie)/2 over all positive/negative pairs, via rank sums.
double metric_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Expected average precision of m positives placed uniformly among n.
double expected_random_ap(std::size_t n, std::size_t m);
double harmonic(std::size_t n);

struct ImpressionMetrics {
  std::string id;
  double map = 0, mrr = 0, p1 = 0, avgc = 0, ndcg5 = 0, ndcg10 = 0, auc = 0;
  bool has_auc = false;
};

struct EvalReport {
  std::string task;
  std::size_t impressions = 0;        // scored
  std::size_t excluded = 0;           // no positive
  std::size_t auc_excluded = 0;       // single class, left out of the AUC mean
  double map = 0, mrr = 0, p1 = 0, avgc = 0, ndcg5 = 0, ndcg10 = 0, auc = 0;
  std::vector<ImpressionMetrics> per_impression;

  nlohmann::ordered_json to_json() const;
};

/// Labels reordered by descending score, ties by doc id ascending.
std::vector<int> ranked_labels(const Impression& imp, const std::vector<double>& scores);

ImpressionMetrics impression_metrics(const Impression& imp, const std::vector<double>& scores);

/// Mean metrics over impressions given per-candidate scores.
EvalReport evaluate_scores(const std::vector<Impression>& imps, const std::vector<std::vector<double>>& scores,
                           const std::string& task, bool keep_per_impression = false);

/// Tab-separated per-impression metrics, one header line.
std::string per_impression_tsv(const EvalReport& r);

}  // namespace user
