#include "user/model/features.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "user/common/error.hpp"
#include "user/log/sessions.hpp"
#include "user/text/tokenizer.hpp"

namespace user {
namespace {

std::string normalized(const std::string& text) {
  std::string out;
  for (const auto& w : split_words(text)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

template <typename Fn>
void for_each_behavior(const UserHistory& h, Fn&& fn) {
  for (const auto& s : h.long_term)
    for (const auto& b : s.behaviors) fn(b);
  for (const auto& b : h.current.behaviors) fn(b);
}

}  // namespace

TermStats::TermStats(const std::vector<Document>& docs) : n_docs_(docs.size()) {
  for (const auto& d : docs) {
    const auto words = split_words(d.title);
    for (const auto& w : std::set<std::string>(words.begin(), words.end())) ++df_[w];
  }
}

double TermStats::idf(const std::string& token) const {
  auto it = df_.find(token);
  const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((static_cast<double>(n_docs_) + 1.0) / (df + 1.0)) + 1.0;
}

void TermStats::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "#docs\t" << n_docs_ << '\n';
  std::map<std::string, std::size_t> sorted(df_.begin(), df_.end());
  for (const auto& [w, n] : sorted) out << w << '\t' << n << '\n';
}

TermStats TermStats::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  TermStats s;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(no, "term stats line without a tab");
    const auto word = line.substr(0, tab);
    const auto n = static_cast<std::size_t>(std::stoull(line.substr(tab + 1)));
    if (no == 1) {
      if (word != "#docs") throw ParseError(no, "term stats must start with #docs");
      s.n_docs_ = n;
    } else {
      s.df_[word] = n;
    }
  }
  return s;
}

FeatureVector relevance_features(const std::string& query, const Document& candidate, const UserHistory& history,
                                 const TermStats& stats) {
  FeatureVector f{};
  const auto q_words = split_words(query);
  if (q_words.empty()) return f;
  const auto d_words = split_words(candidate.title);

  const std::set<std::string> q_set(q_words.begin(), q_words.end());
  const std::set<std::string> d_set(d_words.begin(), d_words.end());
  std::size_t overlap = 0;
  for (const auto& w : q_set) overlap += d_set.count(w);
  f[0] = static_cast<double>(overlap) / static_cast<double>(q_set.size());

  std::map<std::string, double> qv, dv;
  for (const auto& w : q_words) qv[w] += 1.0;
  for (const auto& w : d_words) dv[w] += 1.0;
  double dot = 0, nq = 0, nd = 0;
  for (auto& [w, tf] : qv) {
    tf *= stats.idf(w);
    nq += tf * tf;
  }
  for (auto& [w, tf] : dv) {
    tf *= stats.idf(w);
    nd += tf * tf;
    if (auto it = qv.find(w); it != qv.end()) dot += tf * it->second;
  }
  f[1] = nq > 0 && nd > 0 ? dot / std::sqrt(nq * nd) : 0.0;

  const std::string q_norm = normalized(query);
  std::size_t sat = 0;
  bool seen = false;
  for_each_behavior(history, [&](const Behavior& b) {
    if (b.is_browse()) {
      seen = seen || b.doc.id == candidate.id;
      return;
    }
    const bool same_query = normalized(b.query) == q_norm;
    for (const auto& r : b.results) {
      if (r.doc.id != candidate.id) continue;
      if (r.clicked) seen = true;
      if (same_query && label_sat_click(r.clicked, r.dwell)) ++sat;
    }
  });
  f[2] = std::log1p(static_cast<double>(sat));
  f[3] = seen ? 1.0 : 0.0;
  return f;
}

}  // namespace user
