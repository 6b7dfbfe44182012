#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "user/log/corpus.hpp"
#include "user/log/split.hpp"
#include "user/model/features.hpp"
#include "user/text/tokenizer.hpp"

namespace user {

struct PrepareOptions {
  SplitOptions split;
  TopicRepresentation topics = TopicRepresentation::TokenEmbedding;
  std::size_t min_count = 1;
};

/// Model-ready impressions of both tasks plus the vocabulary and user table.
struct PreparedData {
  std::vector<Impression> train, val, test;
  Vocab vocab;
  std::vector<std::string> users;  // users seen in training impressions, sorted
  TermStats stats;
  std::size_t skipped_searches = 0;
  std::int64_t cut_ts = 0;
};

/// Fills the handcrafted features of every search impression.
void attach_features(std::vector<Impression>& imps, const TermStats& stats);

/// Splits a log, attaches features and builds the vocabulary from corpus
/// titles plus queries logged before the first validation impression.
PreparedData prepare_data(const std::vector<Behavior>& events, const std::vector<Document>& docs,
                          const PrepareOptions& opt = {});

/// `train.jsonl`, `val.jsonl`, `test.jsonl`, `vocab.tsv`, `users.txt`,
/// `termstats.tsv` and `summary.json` under `dir`.
void save_prepared(const std::filesystem::path& dir, const PreparedData& d);
PreparedData load_prepared(const std::filesystem::path& dir);

std::vector<Impression> select_task(const std::vector<Impression>& imps, Task task);

/// History reduced to one behavior kind, with search features recomputed.
std::vector<Impression> restrict_history(const std::vector<Impression>& imps, BehaviorKind kind,
                                         const TermStats& stats);

}  // namespace user
