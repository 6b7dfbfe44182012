#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace user {

struct Document {
  std::string id;
  std::string title;
  std::optional<int> topic;  // planted topic, synthetic corpora only
  double popularity = 0.0;   // click count in the corpus
};

enum class BehaviorKind { Browse, Search };

struct SearchResult {
  Document doc;
  bool clicked = false;
  std::int64_t dwell = 0;  // seconds
};

/// One event of a user's heterogeneous sequence. A Browse populates `doc`;
/// a Search populates `query` and 1..20 `results`.
struct Behavior {
  std::string user;
  std::int64_t ts = 0;
  BehaviorKind kind = BehaviorKind::Browse;
  Document doc;
  std::string query;
  std::vector<SearchResult> results;

  bool is_search() const { return kind == BehaviorKind::Search; }
  bool is_browse() const { return kind == BehaviorKind::Browse; }
};

inline constexpr std::size_t kMaxResults = 20;

struct Session {
  std::vector<Behavior> behaviors;
};

/// Long-term sessions (oldest first) plus the current session so far.
struct UserHistory {
  std::vector<Session> long_term;
  Session current;

  bool empty() const { return long_term.empty() && current.behaviors.empty(); }
};

enum class Task { Search, Recommend };

inline const char* task_name(Task t) { return t == Task::Search ? "search" : "recommend"; }

inline constexpr std::size_t kFeatureCount = 4;
using FeatureVector = std::array<double, kFeatureCount>;

/// A ranking instance. `query` is empty iff the task is Recommend.
struct Impression {
  std::string id;
  std::string user;
  std::int64_t ts = 0;
  Task task = Task::Recommend;
  std::string query;
  std::vector<Document> candidates;
  std::vector<int> labels;
  UserHistory history;
  std::vector<FeatureVector> features;  // per candidate; zeros for Recommend

  std::size_t positives() const {
    std::size_t n = 0;
    for (int l : labels) n += l > 0 ? 1 : 0;
    return n;
  }
};

/// One positive and K negatives from the same impression, as candidate indices.
struct TrainingGroup {
  std::size_t positive = 0;
  std::vector<std::size_t> negatives;
};

}  // namespace user
