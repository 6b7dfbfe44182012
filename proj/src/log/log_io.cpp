#include "user/log/log_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "user/common/error.hpp"

namespace user {
namespace {

using nlohmann::json;

const json& require(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& j, const char* key, std::size_t line) {
  const auto& v = require(j, key, line);
  if (!v.is_string()) throw ParseError(line, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::int64_t require_int(const json& j, const char* key, std::size_t line) {
  const auto& v = require(j, key, line);
  if (!v.is_number_integer()) throw ParseError(line, std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

Document doc_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "document must be an object");
  Document d;
  d.id = require_string(j, "id", line);
  d.title = require_string(j, "title", line);
  if (d.id.empty()) throw ParseError(line, "empty document id");
  if (auto it = j.find("topic"); it != j.end() && !it->is_null()) d.topic = it->get<int>();
  if (auto it = j.find("popularity"); it != j.end()) d.popularity = it->get<double>();
  return d;
}

OrderedJson doc_to_json(const Document& d) {
  OrderedJson j;
  j["id"] = d.id;
  j["title"] = d.title;
  return j;
}

OrderedJson history_behavior_to_json(const Behavior& b) {
  OrderedJson j;
  j["ts"] = b.ts;
  if (b.is_browse()) {
    j["kind"] = "browse";
    j["doc"] = doc_to_json(b.doc);
  } else {
    j["kind"] = "search";
    j["query"] = b.query;
    OrderedJson results = OrderedJson::array();
    for (const auto& r : b.results) {
      if (!r.clicked) continue;
      OrderedJson rj = doc_to_json(r.doc);
      rj["clicked"] = true;
      rj["dwell"] = r.dwell;
      results.push_back(std::move(rj));
    }
    j["results"] = std::move(results);
  }
  return j;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line, no);
  }
}

json parse_json_line(const std::string& line, std::size_t no) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(no, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

Behavior behavior_from_json(const json& j, const std::string& user, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "event must be a JSON object");
  Behavior b;
  b.user = user;
  b.ts = require_int(j, "ts", line);
  const auto kind = require_string(j, "kind", line);
  if (kind == "browse") {
    b.kind = BehaviorKind::Browse;
    b.doc = doc_from_json(require(j, "doc", line), line);
  } else if (kind == "search") {
    b.kind = BehaviorKind::Search;
    b.query = require_string(j, "query", line);
    const auto& results = require(j, "results", line);
    if (!results.is_array() || results.empty()) throw ParseError(line, "search needs a non-empty 'results' array");
    if (results.size() > kMaxResults) throw ParseError(line, "search has more than 20 results");
    for (const auto& r : results) {
      SearchResult sr;
      sr.doc = doc_from_json(r, line);
      if (auto it = r.find("clicked"); it != r.end()) sr.clicked = it->get<bool>();
      if (auto it = r.find("dwell"); it != r.end()) sr.dwell = it->get<std::int64_t>();
      if (sr.dwell < 0) throw ParseError(line, "negative dwell time");
      b.results.push_back(std::move(sr));
    }
  } else {
    throw ParseError(line, "unknown kind '" + kind + "'");
  }
  return b;
}

Behavior parse_behavior(const std::string& line, std::size_t no) {
  const json j = parse_json_line(line, no);
  if (!j.is_object()) throw ParseError(no, "event must be a JSON object");
  return behavior_from_json(j, require_string(j, "user", no), no);
}

std::vector<std::vector<Behavior>> group_by_user(const std::vector<Behavior>& events) {
  std::vector<std::vector<Behavior>> groups;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& e : events) {
    auto [it, fresh] = slot.emplace(e.user, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(e);
  }
  return groups;
}

std::vector<Behavior> parse_log(std::istream& in) {
  std::vector<Behavior> events;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    events.push_back(parse_behavior(line, no));
  }
  auto groups = group_by_user(events);
  std::vector<Behavior> out;
  out.reserve(events.size());
  for (auto& g : groups) {
    std::stable_sort(g.begin(), g.end(), [](const Behavior& a, const Behavior& b) { return a.ts < b.ts; });
    for (auto& e : g) out.push_back(std::move(e));
  }
  return out;
}

std::vector<Behavior> parse_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open log " + path.string());
  return parse_log(in);
}

OrderedJson behavior_to_json(const Behavior& b, bool include_user) {
  OrderedJson j;
  if (include_user) j["user"] = b.user;
  j["ts"] = b.ts;
  if (b.is_browse()) {
    j["kind"] = "browse";
    j["doc"] = doc_to_json(b.doc);
  } else {
    j["kind"] = "search";
    j["query"] = b.query;
    OrderedJson results = OrderedJson::array();
    for (const auto& r : b.results) {
      OrderedJson rj = doc_to_json(r.doc);
      rj["clicked"] = r.clicked;
      rj["dwell"] = r.dwell;
      results.push_back(std::move(rj));
    }
    j["results"] = std::move(results);
  }
  return j;
}

void write_log(std::ostream& out, const std::vector<Behavior>& events) {
  for (const auto& e : events) out << behavior_to_json(e).dump() << '\n';
}

void write_log(const std::filesystem::path& path, const std::vector<Behavior>& events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  write_log(out, events);
}

std::vector<Document> read_corpus(const std::filesystem::path& path) {
  std::vector<Document> docs;
  for_each_line(path, [&](const std::string& line, std::size_t no) {
    docs.push_back(doc_from_json(parse_json_line(line, no), no));
  });
  return docs;
}

void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& d : docs) {
    OrderedJson j = doc_to_json(d);
    if (d.topic) j["topic"] = *d.topic;
    j["popularity"] = d.popularity;
    out << j.dump() << '\n';
  }
}

OrderedJson impression_to_json(const Impression& imp) {
  OrderedJson j;
  j["id"] = imp.id;
  j["user"] = imp.user;
  j["ts"] = imp.ts;
  j["task"] = task_name(imp.task);
  j["query"] = imp.query;
  OrderedJson cands = OrderedJson::array();
  for (const auto& c : imp.candidates) cands.push_back(doc_to_json(c));
  j["candidates"] = std::move(cands);
  j["labels"] = imp.labels;
  OrderedJson feats = OrderedJson::array();
  for (const auto& f : imp.features) feats.push_back(f);
  j["features"] = std::move(feats);
  OrderedJson lt = OrderedJson::array();
  for (const auto& s : imp.history.long_term) {
    OrderedJson sj = OrderedJson::array();
    for (const auto& b : s.behaviors) sj.push_back(history_behavior_to_json(b));
    lt.push_back(std::move(sj));
  }
  OrderedJson cur = OrderedJson::array();
  for (const auto& b : imp.history.current.behaviors) cur.push_back(history_behavior_to_json(b));
  j["history"] = {{"long_term", std::move(lt)}, {"current", std::move(cur)}};
  return j;
}

Impression impression_from_json(const json& j, std::size_t no) {
  if (!j.is_object()) throw ParseError(no, "impression must be a JSON object");
  Impression imp;
  imp.id = require_string(j, "id", no);
  imp.user = require_string(j, "user", no);
  imp.ts = require_int(j, "ts", no);
  const auto task = require_string(j, "task", no);
  if (task == "search") {
    imp.task = Task::Search;
  } else if (task == "recommend") {
    imp.task = Task::Recommend;
  } else {
    throw ParseError(no, "unknown task '" + task + "'");
  }
  imp.query = require_string(j, "query", no);
  for (const auto& c : require(j, "candidates", no)) imp.candidates.push_back(doc_from_json(c, no));
  imp.labels = require(j, "labels", no).get<std::vector<int>>();
  if (imp.labels.size() != imp.candidates.size()) throw ParseError(no, "labels and candidates differ in length");
  if (auto it = j.find("features"); it != j.end()) {
    for (const auto& f : *it) imp.features.push_back(f.get<FeatureVector>());
  }
  if (imp.features.empty()) imp.features.assign(imp.candidates.size(), FeatureVector{});
  if (imp.features.size() != imp.candidates.size()) throw ParseError(no, "features and candidates differ in length");
  if ((imp.task == Task::Search) == imp.query.empty())
    throw ParseError(no, "search impressions need a query and recommend impressions must not have one");
  if (imp.candidates.size() < 2) throw ParseError(no, "impression needs at least two candidates");
  if (auto it = j.find("history"); it != j.end()) {
    for (const auto& s : require(*it, "long_term", no)) {
      Session sess;
      for (const auto& b : s) sess.behaviors.push_back(behavior_from_json(b, imp.user, no));
      imp.history.long_term.push_back(std::move(sess));
    }
    for (const auto& b : require(*it, "current", no))
      imp.history.current.behaviors.push_back(behavior_from_json(b, imp.user, no));
  }
  return imp;
}

std::vector<Impression> read_impressions(const std::filesystem::path& path) {
  std::vector<Impression> out;
  for_each_line(path, [&](const std::string& line, std::size_t no) {
    out.push_back(impression_from_json(parse_json_line(line, no), no));
  });
  return out;
}

void write_impressions(const std::filesystem::path& path, const std::vector<Impression>& imps) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& imp : imps) out << impression_to_json(imp).dump() << '\n';
}

}  // namespace user
