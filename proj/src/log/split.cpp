#include "user/log/split.hpp"

#include <algorithm>
#include <cmath>

#include "user/common/error.hpp"
#include "user/common/rng.hpp"
#include "user/log/log_io.hpp"

namespace user {
namespace {

bool usable_in_history(const Behavior& b) {
  if (b.is_browse()) return true;
  return std::any_of(b.results.begin(), b.results.end(), [](const SearchResult& r) { return r.clicked; });
}

Session truncated(const std::vector<Behavior>& behaviors, std::size_t end, std::int64_t ts, std::size_t max_len) {
  Session s;
  for (std::size_t i = 0; i < end; ++i) {
    const auto& b = behaviors[i];
    if (b.ts < ts && usable_in_history(b)) s.behaviors.push_back(b);
  }
  if (s.behaviors.size() > max_len) s.behaviors.erase(s.behaviors.begin(), s.behaviors.end() - static_cast<long>(max_len));
  return s;
}

}  // namespace

UserHistory build_history(const std::vector<Session>& sessions, std::size_t s, std::size_t b, std::int64_t ts,
                          std::size_t max_sessions, std::size_t max_session_len) {
  UserHistory h;
  for (std::size_t i = 0; i < s; ++i) {
    auto sess = truncated(sessions[i].behaviors, sessions[i].behaviors.size(), ts, max_session_len);
    if (!sess.behaviors.empty()) h.long_term.push_back(std::move(sess));
  }
  if (h.long_term.size() > max_sessions)
    h.long_term.erase(h.long_term.begin(), h.long_term.end() - static_cast<long>(max_sessions));
  h.current = truncated(sessions[s].behaviors, b, ts, max_session_len);
  return h;
}

DatasetSplit split_dataset(const std::vector<Behavior>& events, const Corpus& corpus, const SplitOptions& opt) {
  DatasetSplit out;
  if (events.empty()) throw Error("split_dataset: empty log");
  std::int64_t lo = events.front().ts, hi = events.front().ts;
  for (const auto& e : events) {
    lo = std::min(lo, e.ts);
    hi = std::max(hi, e.ts);
  }
  out.cut_ts = lo + static_cast<std::int64_t>(std::ceil(opt.history_frac * static_cast<double>(hi - lo)));

  std::vector<Impression> experimental;
  for (const auto& user_events : group_by_user(events)) {
    const auto sessions = segment_sessions(user_events, opt.session_gap);
    std::vector<Session> before;
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      const auto& behaviors = sessions[s].behaviors;
      Session pre;
      for (std::size_t b = 0; b < behaviors.size(); ++b) {
        const auto& e = behaviors[b];
        if (e.ts < out.cut_ts) {
          pre.behaviors.push_back(e);
          continue;
        }
        auto history = build_history(sessions, s, b, e.ts, opt.max_sessions, opt.max_session_len);
        const std::string id = e.user + ":" + std::to_string(e.ts) + ":" + std::to_string(b);
        if (e.is_search()) {
          auto imp = build_search_impression(e, history);
          if (!imp) {
            ++out.skipped_searches;
            continue;
          }
          imp->id = id;
          experimental.push_back(std::move(*imp));
        } else {
          auto imp = build_recommend_impression(e.doc, corpus, derive_seed(opt.seed, id), opt.negatives);
          imp.id = id;
          imp.user = e.user;
          imp.ts = e.ts;
          imp.history = std::move(history);
          experimental.push_back(std::move(imp));
        }
      }
      if (!pre.behaviors.empty()) before.push_back(std::move(pre));
    }
    out.history.push_back(std::move(before));
  }

  std::stable_sort(experimental.begin(), experimental.end(), [](const Impression& a, const Impression& b) {
    return a.ts != b.ts ? a.ts < b.ts : a.id < b.id;
  });
  const double total = opt.train_parts + opt.val_parts + opt.test_parts;
  const auto n = static_cast<double>(experimental.size());
  const auto n_train = static_cast<std::size_t>(std::floor(n * opt.train_parts / total));
  const auto n_train_val = static_cast<std::size_t>(std::floor(n * (opt.train_parts + opt.val_parts) / total));
  for (std::size_t i = 0; i < experimental.size(); ++i) {
    auto& dst = i < n_train ? out.train : (i < n_train_val ? out.val : out.test);
    dst.push_back(std::move(experimental[i]));
  }
  return out;
}

}  // namespace user
