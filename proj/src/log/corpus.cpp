#include "user/log/corpus.hpp"

#include <algorithm>
#include <map>

#include "user/common/error.hpp"
#include "user/common/rng.hpp"
#include "user/text/tokenizer.hpp"

namespace user {

Corpus::Corpus(std::vector<Document> docs, TopicRepresentation repr, int embedding_dim)
    : docs_(std::move(docs)), repr_(repr), dim_(embedding_dim) {
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    if (!index_.emplace(docs_[i].id, i).second) throw Error("corpus: duplicate document id " + docs_[i].id);
  }
  double lo = 0, hi = 0;
  if (!docs_.empty()) {
    lo = hi = docs_[0].popularity;
    for (const auto& d : docs_) {
      lo = std::min(lo, d.popularity);
      hi = std::max(hi, d.popularity);
    }
  }
  pop_norm_.reserve(docs_.size());
  for (const auto& d : docs_) pop_norm_.push_back(hi > lo ? (d.popularity - lo) / (hi - lo) : 0.0);

  if (repr_ == TopicRepresentation::PlantedTopic) {
    for (const auto& d : docs_) {
      if (!d.topic) throw Error("corpus: planted-topic representation needs a topic on every document (" + d.id + ")");
      n_topics_ = std::max(n_topics_, *d.topic + 1);
    }
    dim_ = n_topics_;
  }
  topics_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(docs_.size()), dim_);
  for (std::size_t i = 0; i < docs_.size(); ++i) topics_.row(static_cast<Eigen::Index>(i)) = compute_topic_vec(docs_[i]).transpose();
}

long Corpus::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

Eigen::VectorXd Corpus::token_vector(const std::string& token) const {
  Rng rng(fnv1a(token));
  Eigen::VectorXd v(dim_);
  for (int k = 0; k < dim_; ++k) v(k) = rng.normal();
  return v;
}

Eigen::VectorXd Corpus::topic_vec(const Document& d) const {
  auto it = index_.find(d.id);
  return it == index_.end() ? compute_topic_vec(d) : topic_vec(it->second);
}

Eigen::VectorXd Corpus::compute_topic_vec(const Document& d) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  if (repr_ == TopicRepresentation::PlantedTopic) {
    if (d.topic && *d.topic >= 0 && *d.topic < dim_) v(*d.topic) = 1.0;
    return v;
  }
  const auto words = split_words(d.title);
  for (const auto& w : words) v += token_vector(w);
  const double n = v.norm();
  if (n > 0) v /= n;
  return v;
}

std::vector<Document> corpus_from_log(const std::vector<Behavior>& events) {
  std::map<std::string, Document> docs;
  auto touch = [&](const Document& d, double add) {
    auto [it, fresh] = docs.emplace(d.id, d);
    if (fresh) it->second.popularity = 0;
    it->second.popularity += add;
  };
  for (const auto& e : events) {
    if (e.is_browse()) {
      touch(e.doc, 1.0);
    } else {
      for (const auto& r : e.results) touch(r.doc, r.clicked ? 1.0 : 0.0);
    }
  }
  std::vector<Document> out;
  out.reserve(docs.size());
  for (auto& [id, d] : docs) out.push_back(std::move(d));
  return out;
}

}  // namespace user
