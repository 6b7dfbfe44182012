#include "user/synth/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "user/common/error.hpp"
#include "user/common/rng.hpp"
#include "user/log/log_io.hpp"

namespace user {
namespace {

constexpr const char* kConsonants = "bdfgklmnprstvz";
constexpr const char* kVowels = "aeiou";

std::string pseudo_word(Rng& rng) {
  const int syllables = static_cast<int>(rng.integer(2, 3));
  std::string w;
  for (int i = 0; i < syllables; ++i) {
    w += kConsonants[rng.index(14)];
    w += kVowels[rng.index(5)];
  }
  if (rng.bernoulli(0.3)) w += kConsonants[rng.index(14)];
  return w;
}

std::vector<double> zipf_weights(std::size_t n, double s) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
  return w;
}

void check_prob(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
}

std::int64_t dwell_for(Rng& rng, bool sat) {
  return sat ? rng.integer(31, 600) : rng.integer(3, 30);
}

// The word topic t shares with its paired topic, and that topic.
struct Ambiguity {
  std::string word;
  int other = -1;
};

class UserSimulator {
 public:
  UserSimulator(const World& w, const std::string& user, const std::vector<double>& prefs, std::uint64_t seed)
      : w_(w), cfg_(w.config), user_(user), prefs_(prefs), rng_(seed) {}

  std::vector<Behavior> run(std::vector<SearchTruth>* truth, std::size_t* n_sessions) {
    const double span = cfg_.weeks * 7 * 86400;
    // Fractional means are met in expectation.
    const double target = cfg_.sessions_per_week * cfg_.weeks;
    auto mean = static_cast<std::int64_t>(std::floor(target));
    mean += rng_.bernoulli(target - static_cast<double>(mean)) ? 1 : 0;
    const std::int64_t n = std::max<std::int64_t>(1, mean + rng_.integer(-cfg_.session_jitter, cfg_.session_jitter));
    if (n_sessions) *n_sessions += static_cast<std::size_t>(n);
    const double slot = span / static_cast<double>(n);
    std::vector<Behavior> out;
    for (std::int64_t s = 0; s < n; ++s) {
      auto ts = cfg_.start_ts + static_cast<std::int64_t>(static_cast<double>(s) * slot + rng_.uniform(0, slot / 2));
      session(ts, out, truth);
    }
    return out;
  }

 private:
  int topic_from_prefs() { return static_cast<int>(rng_.categorical(prefs_)); }

  const Document& pick_doc(int topic) {
    const auto& ids = w_.docs_by_topic[static_cast<std::size_t>(topic)];
    std::vector<double> weights;
    weights.reserve(ids.size());
    for (auto i : ids) weights.push_back(w_.weights[i]);
    return w_.docs[ids[rng_.categorical(weights)]];
  }

  std::string sample_word(int topic) {
    const auto& words = w_.topic_words[static_cast<std::size_t>(topic)];
    return words[rng_.categorical(zipf_weights(words.size(), cfg_.zipf_exponent))];
  }

  Ambiguity ambiguity(int topic) const {
    if (cfg_.ambiguous_words == 0) return {};
    const auto t = static_cast<std::size_t>(topic);
    if (t / 2 >= cfg_.ambiguous_words) return {};
    return {w_.topic_words[t][1], static_cast<int>(t ^ 1)};
  }

  Behavior search(std::int64_t ts, int topic, std::vector<SearchTruth>* truth) {
    Behavior b;
    b.user = user_;
    b.ts = ts;
    b.kind = BehaviorKind::Search;
    auto amb = ambiguity(topic);
    std::vector<std::string> words;
    int confuser = -1;
    if (amb.other >= 0 && rng_.bernoulli(cfg_.ambiguous_query_rate)) {
      words.push_back(amb.word);
      confuser = amb.other;
    } else {
      const auto k = static_cast<std::size_t>(rng_.integer(1, 3));
      std::set<std::string> seen;
      for (int tries = 0; words.size() < k && tries < 20; ++tries) {
        auto wd = sample_word(topic);
        if (seen.insert(wd).second) words.push_back(wd);
      }
    }
    if (rng_.bernoulli(cfg_.query_stopword_rate)) words.push_back(w_.stopwords[rng_.index(w_.stopwords.size())]);
    for (std::size_t i = 0; i < words.size(); ++i) b.query += (i ? " " : "") + words[i];

    std::vector<std::size_t> picked;
    std::set<std::size_t> used;
    auto take = [&](int t, std::size_t count) {
      std::vector<std::size_t> pool = w_.docs_by_topic[static_cast<std::size_t>(t)];
      rng_.shuffle(pool);
      for (auto d : pool) {
        if (count == 0) break;
        if (used.insert(d).second) {
          picked.push_back(d);
          --count;
        }
      }
    };
    const auto n_on = static_cast<std::size_t>(rng_.integer(cfg_.min_on_topic, cfg_.max_on_topic));
    take(topic, n_on);
    if (confuser >= 0) take(confuser, static_cast<std::size_t>(rng_.integer(3, 6)));
    while (picked.size() < kMaxResults) {
      auto t = static_cast<int>(rng_.index(cfg_.n_topics));
      if (t == topic || cfg_.n_topics == 1) continue;
      take(t, 1);
    }
    rng_.shuffle(picked);
    for (auto d : picked) {
      SearchResult r;
      r.doc = w_.docs[d];
      const bool on = w_.docs[d].topic == topic;
      r.clicked = rng_.bernoulli(on ? cfg_.click_on_topic : cfg_.click_off_topic);
      if (r.clicked) r.dwell = dwell_for(rng_, rng_.bernoulli(on ? cfg_.sat_on_topic : cfg_.sat_off_topic));
      b.results.push_back(std::move(r));
    }
    if (truth) truth->push_back({user_, ts, topic});
    return b;
  }

  void session(std::int64_t ts, std::vector<Behavior>& out, std::vector<SearchTruth>* truth) {
    const int session_topic = topic_from_prefs();
    const auto target = std::min<std::int64_t>(cfg_.max_session_len,
                                               1 + rng_.poisson(std::max(0.0, cfg_.mean_session_len - 1.0)));
    std::int64_t produced = 0;
    while (produced < target) {
      if (produced > 0) ts += rng_.integer(30, 600);
      if (rng_.bernoulli(cfg_.search_rate)) {
        out.push_back(search(ts, topic_from_prefs(), truth));
        ++produced;
        continue;
      }
      Behavior b;
      b.user = user_;
      b.ts = ts;
      b.kind = BehaviorKind::Browse;
      const int topic = rng_.bernoulli(cfg_.session_topic_stickiness) ? session_topic : topic_from_prefs();
      b.doc = pick_doc(topic);
      out.push_back(b);
      ++produced;
      if (rng_.bernoulli(cfg_.p_follow)) {
        ts += rng_.integer(30, 600);
        out.push_back(search(ts, *b.doc.topic, truth));
        ++produced;
      }
    }
  }

  const World& w_;
  const WorldConfig& cfg_;
  std::string user_;
  const std::vector<double>& prefs_;
  Rng rng_;
};

}  // namespace

void WorldConfig::validate() const {
  if (n_users == 0) throw ConfigError("n_users must be positive");
  if (n_topics < 2) throw ConfigError("n_topics must be at least 2");
  if (words_per_topic < 2) throw ConfigError("words_per_topic must be at least 2");
  if (2 * ambiguous_words > n_topics) throw ConfigError("ambiguous_words cannot exceed n_topics / 2");
  if (stopwords == 0) throw ConfigError("stopwords must be positive");
  if (docs_per_topic < static_cast<std::size_t>(max_on_topic) + 6)
    throw ConfigError("docs_per_topic too small for the result lists");
  if (min_title_len < 1 || max_title_len < min_title_len) throw ConfigError("bad title length range");
  if (min_on_topic < 1 || max_on_topic < min_on_topic || max_on_topic > 12) throw ConfigError("bad on-topic range");
  if (weeks <= 0 || sessions_per_week <= 0) throw ConfigError("weeks and sessions_per_week must be positive");
  if (mean_session_len < 1 || max_session_len < 1) throw ConfigError("session lengths must be at least 1");
  if (preference_concentration <= 0 || pareto_shape <= 0) throw ConfigError("concentration and shape must be positive");
  check_prob(stopword_rate, "stopword_rate");
  check_prob(session_topic_stickiness, "session_topic_stickiness");
  check_prob(search_rate, "search_rate");
  check_prob(p_follow, "p_follow");
  check_prob(ambiguous_query_rate, "ambiguous_query_rate");
  check_prob(query_stopword_rate, "query_stopword_rate");
  check_prob(click_on_topic, "click_on_topic");
  check_prob(click_off_topic, "click_off_topic");
  check_prob(sat_on_topic, "sat_on_topic");
  check_prob(sat_off_topic, "sat_off_topic");
  // Sessions must be shorter than half a slot so gaps stay above 30 minutes.
  const double slot = weeks * 7 * 86400 / (sessions_per_week * weeks + session_jitter);
  if (slot / 2 < 2.0 * max_session_len * 600 + 1800) throw ConfigError("sessions_per_week too high for the time span");
}

nlohmann::ordered_json WorldConfig::to_json() const {
  nlohmann::ordered_json j;
  j["n_users"] = n_users;
  j["n_topics"] = n_topics;
  j["words_per_topic"] = words_per_topic;
  j["ambiguous_words"] = ambiguous_words;
  j["stopwords"] = stopwords;
  j["docs_per_topic"] = docs_per_topic;
  j["min_title_len"] = min_title_len;
  j["max_title_len"] = max_title_len;
  j["stopword_rate"] = stopword_rate;
  j["zipf_exponent"] = zipf_exponent;
  j["pareto_shape"] = pareto_shape;
  j["preference_concentration"] = preference_concentration;
  j["weeks"] = weeks;
  j["sessions_per_week"] = sessions_per_week;
  j["session_jitter"] = session_jitter;
  j["mean_session_len"] = mean_session_len;
  j["max_session_len"] = max_session_len;
  j["session_topic_stickiness"] = session_topic_stickiness;
  j["search_rate"] = search_rate;
  j["p_follow"] = p_follow;
  j["ambiguous_query_rate"] = ambiguous_query_rate;
  j["query_stopword_rate"] = query_stopword_rate;
  j["min_on_topic"] = min_on_topic;
  j["max_on_topic"] = max_on_topic;
  j["click_on_topic"] = click_on_topic;
  j["click_off_topic"] = click_off_topic;
  j["sat_on_topic"] = sat_on_topic;
  j["sat_off_topic"] = sat_off_topic;
  j["start_ts"] = start_ts;
  j["seed"] = seed;
  return j;
}

World generate_corpus(const WorldConfig& cfg) {
  cfg.validate();
  World w;
  w.config = cfg;
  Rng rng(derive_seed(cfg.seed, "corpus"));
  std::set<std::string> taken;
  auto fresh = [&] {
    for (;;) {
      auto s = pseudo_word(rng);
      if (taken.insert(s).second) return s;
    }
  };
  w.topic_words.resize(cfg.n_topics);
  for (auto& words : w.topic_words)
    for (std::size_t i = 0; i < cfg.words_per_topic; ++i) words.push_back(fresh());
  for (std::size_t i = 0; i < cfg.stopwords; ++i) w.stopwords.push_back(fresh());
  // Topics 2k and 2k+1 share their rank-1 word, so titles alone cannot tell them apart.
  for (std::size_t k = 0; k < cfg.ambiguous_words; ++k) w.topic_words[2 * k + 1][1] = w.topic_words[2 * k][1];

  w.docs_by_topic.resize(cfg.n_topics);
  const auto n_docs = cfg.n_topics * cfg.docs_per_topic;
  const int width = static_cast<int>(std::to_string(n_docs).size());
  for (std::size_t t = 0; t < cfg.n_topics; ++t) {
    const auto zipf = zipf_weights(w.topic_words[t].size(), cfg.zipf_exponent);
    for (std::size_t k = 0; k < cfg.docs_per_topic; ++k) {
      Document d;
      std::string num = std::to_string(w.docs.size());
      d.id = "d" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
      d.topic = static_cast<int>(t);
      const auto len = rng.integer(cfg.min_title_len, cfg.max_title_len);
      for (std::int64_t i = 0; i < len; ++i) {
        const std::string& tok = rng.bernoulli(cfg.stopword_rate) ? w.stopwords[rng.index(w.stopwords.size())]
                                                                   : w.topic_words[t][rng.categorical(zipf)];
        d.title += (i ? " " : "") + tok;
      }
      const double weight = std::pow(1.0 - rng.uniform(), -1.0 / cfg.pareto_shape);
      d.popularity = std::round(10.0 * weight);
      w.weights.push_back(weight);
      w.docs_by_topic[t].push_back(w.docs.size());
      w.docs.push_back(std::move(d));
    }
  }
  return w;
}

std::vector<Behavior> generate_user_log(const World& world, const std::string& user,
                                        const std::vector<double>& preferences, std::uint64_t seed,
                                        std::vector<SearchTruth>* truth, std::size_t* sessions) {
  if (preferences.size() != world.config.n_topics) throw ConfigError("preference vector has the wrong length");
  return UserSimulator(world, user, preferences, seed).run(truth, sessions);
}

GeneratedData generate_data(const WorldConfig& cfg) {
  auto world = generate_corpus(cfg);
  GeneratedData d;
  d.corpus = world.docs;
  const int width = static_cast<int>(std::to_string(cfg.n_users).size());
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    std::string num = std::to_string(u + 1);
    std::string id = "u" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(num.size(), width), '0') + num;
    Rng prefs_rng(derive_seed(cfg.seed, "prefs:" + id));
    auto prefs = prefs_rng.dirichlet(cfg.n_topics, cfg.preference_concentration);
    auto events = generate_user_log(world, id, prefs, derive_seed(cfg.seed, "log:" + id), &d.searches, &d.sessions);
    d.log.insert(d.log.end(), events.begin(), events.end());
    d.users.push_back(id);
    d.preferences.push_back(std::move(prefs));
  }
  return d;
}

nlohmann::ordered_json manifest_json(const WorldConfig& cfg, const GeneratedData& d) {
  nlohmann::ordered_json j;
  j["config"] = cfg.to_json();
  j["sessions"] = d.sessions;
  j["events"] = d.log.size();
  nlohmann::ordered_json users = nlohmann::ordered_json::array();
  for (std::size_t u = 0; u < d.users.size(); ++u) users.push_back({{"id", d.users[u]}, {"topics", d.preferences[u]}});
  j["users"] = users;
  nlohmann::ordered_json searches = nlohmann::ordered_json::array();
  for (const auto& s : d.searches) searches.push_back({{"user", s.user}, {"ts", s.ts}, {"topic", s.topic}});
  j["searches"] = searches;
  return j;
}

GeneratedData generate_dataset(const WorldConfig& cfg, const std::filesystem::path& dir) {
  auto d = generate_data(cfg);
  std::filesystem::create_directories(dir);
  write_log(dir / "log.jsonl", d.log);
  write_corpus(dir / "corpus.jsonl", d.corpus);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << manifest_json(cfg, d).dump(1) << '\n';
  return d;
}

std::unordered_map<std::string, int> read_search_truth(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot open " + manifest.string());
  auto j = nlohmann::json::parse(in);
  std::unordered_map<std::string, int> out;
  for (const auto& s : j.at("searches"))
    out[s.at("user").get<std::string>() + ":" + std::to_string(s.at("ts").get<std::int64_t>())] = s.at("topic").get<int>();
  return out;
}

}  // namespace user
