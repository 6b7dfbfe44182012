#include <algorithm>

#include "user/common/error.hpp"
#include "user/model/ranking_head.hpp"

namespace user {

std::vector<RankedCandidate> rank_candidates(const std::vector<Document>& candidates, const std::vector<double>& scores) {
  if (candidates.size() != scores.size())
    throw Error("rank_candidates: " + std::to_string(candidates.size()) + " candidates but " +
                std::to_string(scores.size()) + " scores");
  std::vector<RankedCandidate> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back({i, candidates[i].id, scores[i]});
  std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
    return a.index < b.index;
  });
  return out;
}

}  // namespace user
