#include "user/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "user/common/error.hpp"
#include "user/model/ranking_head.hpp"

namespace user {

namespace {

void require_positive(const std::vector<int>& ranked, const char* name) {
  if (std::none_of(ranked.begin(), ranked.end(), [](int l) { return l > 0; }))
    throw Error(std::string(name) + ": no positive label");
}

}  // namespace

double metric_map(const std::vector<int>& ranked) {
  require_positive(ranked, "metric_map");
  double sum = 0;
  int hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i] <= 0) continue;
    ++hits;
    sum += hits / static_cast<double>(i + 1);
  }
  return sum / hits;
}

double metric_mrr(const std::vector<int>& ranked) {
  require_positive(ranked, "metric_mrr");
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (ranked[i] > 0) return 1.0 / static_cast<double>(i + 1);
  return 0;
}

double metric_p1(const std::vector<int>& ranked) {
  require_positive(ranked, "metric_p1");
  return ranked[0] > 0 ? 1.0 : 0.0;
}

double metric_avgc(const std::vector<int>& ranked) {
  require_positive(ranked, "metric_avgc");
  double sum = 0;
  int hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i] <= 0) continue;
    ++hits;
    sum += static_cast<double>(i + 1);
  }
  return sum / hits;
}

double metric_ndcg(const std::vector<int>& ranked, std::size_t k) {
  require_positive(ranked, "metric_ndcg");
  double dcg = 0, ideal = 0;
  std::size_t positives = 0;
  for (int l : ranked) positives += l > 0 ? 1 : 0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    const double disc = 1.0 / std::log2(static_cast<double>(i) + 2.0);
    if (ranked[i] > 0) dcg += disc;
    if (i < positives) ideal += disc;
  }
  return dcg / ideal;
}

double metric_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw Error("metric_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over tie blocks.
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  double pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] > 0) {
      ++pos;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) throw Error("metric_auc: need both positive and negative labels");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

double harmonic(std::size_t n) {
  double h = 0;
  for (std::size_t k = 1; k <= n; ++k) h += 1.0 / static_cast<double>(k);
  return h;
}

double expected_random_ap(std::size_t n, std::size_t m) {
  if (n == 0 || m == 0 || m > n) throw Error("expected_random_ap: need 1 <= m <= n");
  const double hn = harmonic(n);
  if (n == 1) return 1.0;
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  return ((mm - 1) / (nn - 1) * (nn - hn) + hn) / nn;
}

std::vector<int> ranked_labels(const Impression& imp, const std::vector<double>& scores) {
  auto order = rank_candidates(imp.candidates, scores);
  std::vector<int> out;
  out.reserve(order.size());
  for (const auto& r : order) out.push_back(imp.labels.at(r.index));
  return out;
}

ImpressionMetrics impression_metrics(const Impression& imp, const std::vector<double>& scores) {
  auto ranked = ranked_labels(imp, scores);
  ImpressionMetrics m;
  m.id = imp.id;
  m.map = metric_map(ranked);
  m.mrr = metric_mrr(ranked);
  m.p1 = metric_p1(ranked);
  m.avgc = metric_avgc(ranked);
  m.ndcg5 = metric_ndcg(ranked, 5);
  m.ndcg10 = metric_ndcg(ranked, 10);
  const std::size_t pos = imp.positives();
  if (pos < imp.labels.size()) {
    m.auc = metric_auc(scores, imp.labels);
    m.has_auc = true;
  }
  return m;
}

EvalReport evaluate_scores(const std::vector<Impression>& imps, const std::vector<std::vector<double>>& scores,
                           const std::string& task, bool keep_per_impression) {
  if (imps.empty()) throw Error("evaluate: empty impression set");
  if (imps.size() != scores.size()) throw Error("evaluate: impression and score counts differ");
  EvalReport r;
  r.task = task;
  std::size_t auc_n = 0;
  for (std::size_t i = 0; i < imps.size(); ++i) {
    if (imps[i].positives() == 0) {
      ++r.excluded;
      continue;
    }
    auto m = impression_metrics(imps[i], scores[i]);
    ++r.impressions;
    r.map += m.map;
    r.mrr += m.mrr;
    r.p1 += m.p1;
    r.avgc += m.avgc;
    r.ndcg5 += m.ndcg5;
    r.ndcg10 += m.ndcg10;
    if (m.has_auc) {
      r.auc += m.auc;
      ++auc_n;
    } else {
      ++r.auc_excluded;
    }
    if (keep_per_impression) r.per_impression.push_back(std::move(m));
  }
  if (r.impressions == 0) throw Error("evaluate: no impression has a positive label");
  const double n = static_cast<double>(r.impressions);
  r.map /= n;
  r.mrr /= n;
  r.p1 /= n;
  r.avgc /= n;
  r.ndcg5 /= n;
  r.ndcg10 /= n;
  r.auc = auc_n ? r.auc / static_cast<double>(auc_n) : 0.5;
  return r;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = task;
  j["impressions"] = impressions;
  j["excluded"] = excluded;
  j["auc_excluded"] = auc_excluded;
  j["map"] = map;
  j["mrr"] = mrr;
  j["p1"] = p1;
  j["avgc"] = avgc;
  j["ndcg5"] = ndcg5;
  j["ndcg10"] = ndcg10;
  j["auc"] = auc;
  return j;
}

std::string per_impression_tsv(const EvalReport& r) {
  std::ostringstream s;
  s << "impression_id\tmap\tmrr\tp1\tavgc\tndcg5\tndcg10\tauc\n";
  for (const auto& m : r.per_impression) {
    s << m.id << '\t' << m.map << '\t' << m.mrr << '\t' << m.p1 << '\t' << m.avgc << '\t' << m.ndcg5 << '\t'
      << m.ndcg10 << '\t';
    if (m.has_auc) {
      s << m.auc;
    } else {
      s << "NA";
    }
    s << '\n';
  }
  return s.str();
}

}  // namespace user
