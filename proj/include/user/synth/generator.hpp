#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "user/log/types.hpp"

namespace user {

struct WorldConfig {
  std::size_t n_users = 200;
  std::size_t n_topics = 10;
  std::size_t words_per_topic = 20;
  std::size_t ambiguous_words = 5;   // each shared by a pair of topics
  std::size_t stopwords = 10;
  std::size_t docs_per_topic = 100;
  int min_title_len = 4, max_title_len = 12;
  double stopword_rate = 0.4;     // share of title tokens that are stopwords
  double zipf_exponent = 1.0;     // word frequency skew inside a topic
  double pareto_shape = 4.0;      // doc popularity tail
  double preference_concentration = 0.1;  // Dirichlet over topics per user
  double weeks = 13;
  double sessions_per_week = 1.5;
  int session_jitter = 2;         // +- sessions per user around the mean
  double mean_session_len = 3.5;
  int max_session_len = 8;
  double session_topic_stickiness = 0.8;  // browse stays on the session topic
  double search_rate = 0.3;       // share of non-follow-up events that are searches
  double p_follow = 0.6;          // browse followed by a search on its topic
  double ambiguous_query_rate = 0.3;
  double query_stopword_rate = 0.1;
  int min_on_topic = 3, max_on_topic = 8;
  double click_on_topic = 0.9, click_off_topic = 0.05;
  double sat_on_topic = 0.95, sat_off_topic = 0.05;  // P(dwell > 30 s | click)
  std::int64_t start_ts = 1700000000;
  std::uint64_t seed = 7;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

struct SearchTruth {
  std::string user;
  std::int64_t ts = 0;
  int topic = 0;
};

struct World {
  WorldConfig config;
  std::vector<std::vector<std::string>> topic_words;  // includes the ambiguous words
  std::vector<std::string> stopwords;
  std::vector<Document> docs;
  std::vector<std::vector<std::size_t>> docs_by_topic;
  std::vector<double> weights;  // browse propensity per doc
};

struct GeneratedData {
  std::vector<Document> corpus;
  std::vector<Behavior> log;  // grouped by user, time-ordered
  std::vector<std::string> users;
  std::vector<std::vector<double>> preferences;
  std::vector<SearchTruth> searches;
  std::size_t sessions = 0;
};

World generate_corpus(const WorldConfig& cfg);

/// One user's time-ordered behaviors; appends planted search topics to `truth`.
std::vector<Behavior> generate_user_log(const World& world, const std::string& user,
                                        const std::vector<double>& preferences, std::uint64_t seed,
                                        std::vector<SearchTruth>* truth = nullptr, std::size_t* sessions = nullptr);

GeneratedData generate_data(const WorldConfig& cfg);

/// Writes `log.jsonl`, `corpus.jsonl` and `manifest.json` under `dir`.
GeneratedData generate_dataset(const WorldConfig& cfg, const std::filesystem::path& dir);

nlohmann::ordered_json manifest_json(const WorldConfig& cfg, const GeneratedData& d);

/// Planted search topic keyed by "user:ts", read back from a manifest.
std::unordered_map<std::string, int> read_search_truth(const std::filesystem::path& manifest);

}  // namespace user
