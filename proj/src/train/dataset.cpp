#include "user/train/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "user/common/error.hpp"
#include "user/log/impressions.hpp"
#include "user/log/log_io.hpp"

namespace user {

void attach_features(std::vector<Impression>& imps, const TermStats& stats) {
  for (auto& imp : imps) {
    imp.features.assign(imp.candidates.size(), FeatureVector{});
    if (imp.task != Task::Search) continue;
    for (std::size_t i = 0; i < imp.candidates.size(); ++i)
      imp.features[i] = relevance_features(imp.query, imp.candidates[i], imp.history, stats);
  }
}

PreparedData prepare_data(const std::vector<Behavior>& events, const std::vector<Document>& docs,
                          const PrepareOptions& opt) {
  Corpus corpus(docs, opt.topics);
  auto split = split_dataset(events, corpus, opt.split);
  PreparedData d;
  d.train = std::move(split.train);
  d.val = std::move(split.val);
  d.test = std::move(split.test);
  d.skipped_searches = split.skipped_searches;
  d.cut_ts = split.cut_ts;
  d.stats = TermStats(docs);
  attach_features(d.train, d.stats);
  attach_features(d.val, d.stats);
  attach_features(d.test, d.stats);

  const std::int64_t vocab_cut = d.val.empty() ? std::numeric_limits<std::int64_t>::max() : d.val.front().ts;
  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& doc : docs) texts.push_back(doc.title);
  for (const auto& e : events)
    if (e.is_search() && e.ts < vocab_cut) texts.push_back(e.query);
  d.vocab = Vocab::build(texts, opt.min_count);

  std::set<std::string> users;
  for (const auto& imp : d.train) users.insert(imp.user);
  d.users.assign(users.begin(), users.end());
  return d;
}

void save_prepared(const std::filesystem::path& dir, const PreparedData& d) {
  std::filesystem::create_directories(dir);
  write_impressions(dir / "train.jsonl", d.train);
  write_impressions(dir / "val.jsonl", d.val);
  write_impressions(dir / "test.jsonl", d.test);
  d.vocab.save(dir / "vocab.tsv");
  d.stats.save(dir / "termstats.tsv");
  {
    std::ofstream out(dir / "users.txt");
    if (!out) throw Error("cannot write " + (dir / "users.txt").string());
    for (const auto& u : d.users) out << u << '\n';
  }
  auto count = [](const std::vector<Impression>& v, Task t) {
    return std::count_if(v.begin(), v.end(), [t](const Impression& i) { return i.task == t; });
  };
  nlohmann::ordered_json j;
  j["cut_ts"] = d.cut_ts;
  j["skipped_searches"] = d.skipped_searches;
  j["vocab"] = d.vocab.size();
  j["users"] = d.users.size();
  for (const auto& [name, v] : {std::pair{"train", &d.train}, std::pair{"val", &d.val}, std::pair{"test", &d.test}}) {
    j[name]["search"] = count(*v, Task::Search);
    j[name]["recommend"] = count(*v, Task::Recommend);
  }
  std::ofstream out(dir / "summary.json");
  if (!out) throw Error("cannot write " + (dir / "summary.json").string());
  out << j.dump(2) << '\n';
}

PreparedData load_prepared(const std::filesystem::path& dir) {
  PreparedData d;
  d.train = read_impressions(dir / "train.jsonl");
  d.val = read_impressions(dir / "val.jsonl");
  d.test = read_impressions(dir / "test.jsonl");
  d.vocab = Vocab::load(dir / "vocab.tsv");
  d.stats = TermStats::load(dir / "termstats.tsv");
  std::ifstream in(dir / "users.txt");
  if (!in) throw Error("cannot open " + (dir / "users.txt").string());
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) d.users.push_back(line);
  if (std::filesystem::exists(dir / "summary.json")) {
    std::ifstream sin(dir / "summary.json");
    const auto j = nlohmann::json::parse(sin);
    d.cut_ts = j.value("cut_ts", std::int64_t{0});
    d.skipped_searches = j.value("skipped_searches", std::size_t{0});
  }
  return d;
}

std::vector<Impression> select_task(const std::vector<Impression>& imps, Task task) {
  std::vector<Impression> out;
  for (const auto& i : imps)
    if (i.task == task) out.push_back(i);
  return out;
}

std::vector<Impression> restrict_history(const std::vector<Impression>& imps, BehaviorKind kind,
                                         const TermStats& stats) {
  std::vector<Impression> out = imps;
  for (auto& imp : out) imp.history = filter_history(imp.history, kind);
  attach_features(out, stats);
  return out;
}

}  // namespace user
