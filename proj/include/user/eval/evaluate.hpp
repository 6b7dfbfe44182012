#pragma once

#include <thread>
#include <vector>

#include "user/eval/metrics.hpp"
#include "user/model/user_model.hpp"

namespace user {

/// Scores every impression with a frozen model. Impressions are split into
/// contiguous blocks across `workers` threads; results do not depend on the
/// worker count.
template <typename S>
std::vector<std::vector<double>> score_all(const UserModel<S>& model, const std::vector<Impression>& imps,
                                           int workers = 1) {
  std::vector<std::vector<double>> out(imps.size());
  const auto n = imps.size();
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) out[i] = model.score_impression(imps[i]);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t * n / w; i < (t + 1) * n / w; ++i) out[i] = model.score_impression(imps[i]);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

template <typename S>
EvalReport evaluate(const UserModel<S>& model, const std::vector<Impression>& imps, const std::string& task,
                    int workers = 1, bool keep_per_impression = false) {
  return evaluate_scores(imps, score_all(model, imps, workers), task, keep_per_impression);
}

}  // namespace user
