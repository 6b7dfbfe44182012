#pragma once

#include <Eigen/Dense>

#include <string>
#include <unordered_map>
#include <vector>

#include "user/log/types.hpp"

namespace user {

/// How document "topic similarity" is measured when ranking pseudo negatives.
enum class TopicRepresentation {
  TokenEmbedding,  // cosine of mean fixed pseudo-random token vectors
  PlantedTopic,    // one-hot planted topic ids (synthetic corpora)
};

/// A document collection with pre-computed popularity and topic vectors.
class Corpus {
 public:
  explicit Corpus(std::vector<Document> docs, TopicRepresentation repr = TopicRepresentation::TokenEmbedding,
                  int embedding_dim = 128);

  const std::vector<Document>& docs() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  /// Index of a doc id, or -1.
  long find(const std::string& id) const;

  /// Min-max normalized popularity in [0, 1].
  double popularity_norm(std::size_t i) const { return pop_norm_[i]; }

  /// Unit topic vector of document i (zero if it has no tokens).
  Eigen::VectorXd topic_vec(std::size_t i) const { return topics_.row(static_cast<Eigen::Index>(i)).transpose(); }
  /// Topic vector of an arbitrary document (corpus row when present).
  Eigen::VectorXd topic_vec(const Document& d) const;
  const Eigen::MatrixXd& topic_matrix() const { return topics_; }

  TopicRepresentation representation() const { return repr_; }

 private:
  Eigen::VectorXd token_vector(const std::string& token) const;
  Eigen::VectorXd compute_topic_vec(const Document& d) const;

  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> pop_norm_;
  Eigen::MatrixXd topics_;
  TopicRepresentation repr_;
  int dim_;
  int n_topics_ = 0;
};

/// Builds a corpus from the documents seen in a log; popularity is the
/// number of browses plus clicks of each document.
std::vector<Document> corpus_from_log(const std::vector<Behavior>& events);

}  // namespace user
