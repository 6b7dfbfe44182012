#pragma once

#include <cstdint>
#include <vector>

#include "user/log/corpus.hpp"
#include "user/log/impressions.hpp"
#include "user/log/sessions.hpp"

namespace user {

struct SplitOptions {
  double history_frac = 8.0 / 13.0;  // leading share of the time span used only as history
  std::int64_t session_gap = kSessionGapSeconds;
  std::size_t max_sessions = 20;
  std::size_t max_session_len = 5;
  PseudoNegativeOptions negatives;
  std::uint64_t seed = 7;
  double train_parts = 4, val_parts = 1, test_parts = 1;
};

struct DatasetSplit {
  std::int64_t cut_ts = 0;                      // first experimental timestamp
  std::vector<std::vector<Session>> history;    // per user, sessions before the cut
  std::vector<Impression> train, val, test;     // each ordered by (ts, id)
  std::size_t skipped_searches = 0;             // searches without a sat-click
};

/// Causal history of event (session s, position b): up to `max_sessions`
/// previous sessions and the earlier part of the current one, each truncated
/// to the most recent `max_session_len` behaviors. Only behaviors strictly
/// before `ts` are kept; searches without any clicked result are skipped.
UserHistory build_history(const std::vector<Session>& sessions, std::size_t s, std::size_t b, std::int64_t ts,
                          std::size_t max_sessions, std::size_t max_session_len);

/// Turns a grouped, time-sorted log into history plus train/val/test
/// impressions. Events before the time cut serve only as history; later
/// events become impressions, which are ordered by time and cut 4:1:1.
DatasetSplit split_dataset(const std::vector<Behavior>& events, const Corpus& corpus, const SplitOptions& opt = {});

}  // namespace user
