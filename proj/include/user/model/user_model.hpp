#pragma once

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "user/log/types.hpp"
#include "user/model/history_encoder.hpp"
#include "user/model/ranking_head.hpp"
#include "user/numerics/checkpoint.hpp"

namespace user {

enum class ModelTag { Unified, Search, Recommend };

const char* tag_name(ModelTag t);
ModelTag parse_tag(const std::string& s);
inline ModelTag tag_for(Task t) { return t == Task::Search ? ModelTag::Search : ModelTag::Recommend; }

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

void write_sidecar(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_sidecar(const std::filesystem::path& path);

/// Everything computed once per impression before candidates are scored.
template <typename S>
struct ImpressionContext {
  Task task = Task::Search;
  TextEncoding<S> query;
  ad::Var<S> intent;    // I_t
  ad::Var<S> intent_s;  // I_t^s
  ad::Var<S> intent_l;  // I_t^l
  HistorySequence<S> history;
};

/// The full four-stage model: text, session and history encoders plus the
/// ranking head, over one parameter store.
template <typename S>
class UserModel {
 public:
  UserModel(const ModelConfig& cfg, Vocab vocab, std::vector<std::string> users)
      : cfg_(cfg), vocab_(std::move(vocab)), users_(std::move(users)) {
    for (std::size_t i = 0; i < users_.size(); ++i) {
      if (!rows_.emplace(users_[i], static_cast<int>(i) + 1).second) throw Error("duplicate user id: " + users_[i]);
    }
    Rng rng(cfg.init_seed);
    text_ = TextEncoder<S>(store_, cfg_, vocab_.size(), rng);
    session_ = SessionEncoder<S>(store_, cfg_, users_.size() + 1, rng);
    history_ = HistoryEncoder<S>(store_, cfg_, rng);
    head_ = RankingHead<S>(store_, cfg_, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  const std::vector<std::string>& users() const { return users_; }
  ad::ParamStore<S>& params() { return store_; }
  const ad::ParamStore<S>& params() const { return store_; }
  const TextEncoder<S>& text_encoder() const { return text_; }
  const SessionEncoder<S>& session_encoder() const { return session_; }
  const HistoryEncoder<S>& history_encoder() const { return history_; }
  const RankingHead<S>& head() const { return head_; }

  ModelTag tag = ModelTag::Unified;
  /// Encode all texts of an impression in one packed pass (same results).
  bool batch_text = true;

  /// Embedding row of a user; 0 is the shared cold-start row.
  int user_row(const std::string& user) const {
    auto it = rows_.find(user);
    return it == rows_.end() ? 0 : it->second;
  }

  /// Hash over the architecture, vocabulary, user table and parameter shapes.
  std::string fingerprint() const {
    std::string desc = cfg_.describe() + ";vocab=" + std::to_string(vocab_.size()) +
                       ";users=" + std::to_string(users_.size());
    for (const auto& p : store_) desc += ";" + p.name + ":" + ad::shape_str(p.value);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(desc)));
    return buf;
  }

  /// Graph bound to this model's parameters.
  std::unique_ptr<ad::Graph<S>> make_graph(bool track_grad) const {
    return std::make_unique<ad::Graph<S>>(const_cast<ad::ParamStore<S>*>(&store_), track_grad);
  }

  const TextEncoding<S>& encode_text(ad::Graph<S>& g, const std::string& text, TextCache<S>& cache) const {
    auto it = cache.find(text);
    if (it != cache.end()) return it->second;
    auto seq = tokenize(text, vocab_, static_cast<std::size_t>(cfg_.max_len));
    return cache.emplace(text, text_.encode(g, seq)).first->second;
  }

  /// Batch-encodes every text the impression needs that is not cached yet.
  void prefetch_texts(ad::Graph<S>& g, const Impression& imp, TextCache<S>& cache) const {
    std::vector<std::string> texts;
    std::unordered_set<std::string> seen;
    auto want = [&](const std::string& t) {
      if (!cache.count(t) && seen.insert(t).second) texts.push_back(t);
    };
    auto behaviors = [&](const Session& s) {
      for (const auto& b : s.behaviors) {
        if (b.is_browse()) {
          want(b.doc.title);
          continue;
        }
        if (!encodable(b)) continue;
        want(b.query);
        for (const auto& r : b.results)
          if (r.clicked) want(r.doc.title);
      }
    };
    for (const auto& s : imp.history.long_term) behaviors(s);
    behaviors(imp.history.current);
    if (imp.task == Task::Search) want(imp.query);
    for (const auto& c : imp.candidates) want(c.title);
    if (texts.empty()) return;
    std::vector<TokenSeq> seqs;
    seqs.reserve(texts.size());
    for (const auto& t : texts) seqs.push_back(tokenize(t, vocab_, static_cast<std::size_t>(cfg_.max_len)));
    auto enc = text_.encode_batch(g, seqs);
    for (std::size_t i = 0; i < texts.size(); ++i) cache.emplace(texts[i], std::move(enc[i]));
  }

  /// Browses map to the pooled title; searches fuse the query with their
  /// clicked documents.
  BehaviorVector<S> encode_behavior(ad::Graph<S>& g, const Behavior& b, int position, TextCache<S>& cache) const {
    BehaviorVector<S> out;
    out.kind = b.kind;
    out.position = position;
    if (b.is_browse()) {
      out.vec = encode_text(g, b.doc.title, cache).r;
      return out;
    }
    const auto& q = encode_text(g, b.query, cache);
    std::vector<const TextEncoding<S>*> clicked;
    for (const auto& r : b.results)
      if (r.clicked) clicked.push_back(&encode_text(g, r.doc.title, cache));
    out.vec = session_.encode_search(g, q, clicked);
    return out;
  }

  std::vector<BehaviorVector<S>> encode_session(ad::Graph<S>& g, const Session& s, TextCache<S>& cache) const {
    std::vector<BehaviorVector<S>> out;
    const auto limit = static_cast<std::size_t>(cfg_.max_session_len);
    const auto& bs = s.behaviors;
    std::size_t usable = 0;
    for (const auto& b : bs) usable += encodable(b) ? 1 : 0;
    std::size_t skip = usable > limit ? usable - limit : 0;
    for (const auto& b : bs) {
      if (!encodable(b)) continue;
      if (skip > 0) {
        --skip;
        continue;
      }
      out.push_back(encode_behavior(g, b, static_cast<int>(out.size()), cache));
    }
    return out;
  }

  ImpressionContext<S> encode_context(ad::Graph<S>& g, const Impression& imp, TextCache<S>& cache) const {
    ImpressionContext<S> ctx;
    ctx.task = imp.task;
    if (batch_text) prefetch_texts(g, imp, cache);
    const TextEncoding<S>* q = nullptr;
    if (imp.task == Task::Search) {
      ctx.query = encode_text(g, imp.query, cache);
      q = &ctx.query;
    }
    ctx.intent = session_.select_gate(g, imp.task, q, user_row(imp.user));
    const auto target_kind = imp.task == Task::Search ? BehaviorKind::Search : BehaviorKind::Browse;
    auto current = encode_session(g, imp.history.current, cache);
    ctx.intent_s = session_.transform(g, current, std::make_pair(ctx.intent, target_kind)).target;

    std::vector<std::vector<BehaviorVector<S>>> long_term;
    const auto& lt = imp.history.long_term;
    const std::size_t first = lt.size() > static_cast<std::size_t>(cfg_.max_sessions)
                                  ? lt.size() - static_cast<std::size_t>(cfg_.max_sessions)
                                  : 0;
    for (std::size_t i = first; i < lt.size(); ++i) long_term.push_back(encode_session(g, lt[i], cache));
    ctx.history = history_.encode(g, session_, long_term);
    ctx.intent_l = history_.fuse(g, ctx.history, ctx.intent_s);
    return ctx;
  }

  ScoreInputs<S> score_inputs(ad::Graph<S>& g, const ImpressionContext<S>& ctx, const Impression& imp,
                              std::size_t candidate, TextCache<S>& cache) const {
    const auto& d = encode_text(g, imp.candidates.at(candidate).title, cache);
    ScoreInputs<S> in;
    in.task = ctx.task;
    in.intent_s = ctx.intent_s;
    in.intent_l = ctx.intent_l;
    in.doc = d.r;
    in.doc_l = history_.fuse(g, ctx.history, d.r);
    if (ctx.task == Task::Search) {
      in.cq = ctx.query.C;
      in.mq = ctx.query.mask;
      in.cd = d.C;
      in.md = d.mask;
      if (candidate < imp.features.size()) in.features = imp.features[candidate];
    }
    return in;
  }

  ad::Var<S> score(ad::Graph<S>& g, const ImpressionContext<S>& ctx, const Impression& imp, std::size_t candidate,
                   TextCache<S>& cache) const {
    return head_.score(g, score_inputs(g, ctx, imp, candidate, cache));
  }

  /// Inference scores for every candidate of an impression.
  std::vector<double> score_impression(const Impression& imp) const {
    auto g = make_graph(false);
    TextCache<S> cache;
    auto ctx = encode_context(*g, imp, cache);
    std::vector<double> out;
    out.reserve(imp.candidates.size());
    for (std::size_t i = 0; i < imp.candidates.size(); ++i)
      out.push_back(static_cast<double>(score(*g, ctx, imp, i, cache).scalar()));
    return out;
  }

 private:
  static bool encodable(const Behavior& b) {
    if (b.is_browse()) return true;
    for (const auto& r : b.results)
      if (r.clicked) return true;
    return false;
  }

  ModelConfig cfg_;
  Vocab vocab_;
  std::vector<std::string> users_;
  std::unordered_map<std::string, int> rows_;
  ad::ParamStore<S> store_;
  TextEncoder<S> text_;
  SessionEncoder<S> session_;
  HistoryEncoder<S> history_;
  RankingHead<S> head_;
};

/// Writes `dir/model.ckpt`, `dir/model.json` and `dir/vocab.tsv`.
template <typename S>
void save_model(const std::filesystem::path& dir, const UserModel<S>& m) {
  std::filesystem::create_directories(dir);
  ad::save_checkpoint(dir / "model.ckpt", m.params());
  m.vocab().save(dir / "vocab.tsv");
  nlohmann::ordered_json j;
  j["fingerprint"] = m.fingerprint();
  j["task"] = tag_name(m.tag);
  j["config"] = config_to_json(m.config());
  j["users"] = m.users();
  write_sidecar(dir / "model.json", j.dump(2));
}

template <typename S>
UserModel<S> load_model(const std::filesystem::path& dir) {
  auto j = read_sidecar(dir / "model.json");
  UserModel<S> m(config_from_json(j.at("config")), Vocab::load(dir / "vocab.tsv"),
                 j.at("users").get<std::vector<std::string>>());
  const auto want = j.at("fingerprint").get<std::string>();
  if (m.fingerprint() != want)
    throw Error("model " + dir.string() + ": fingerprint mismatch (sidecar " + want + ", rebuilt " + m.fingerprint() +
                ")");
  m.tag = parse_tag(j.at("task").get<std::string>());
  ad::load_checkpoint(dir / "model.ckpt", m.params());
  return m;
}

}  // namespace user
