#include "user/cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "user/common/error.hpp"

namespace user {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
std::string str(T v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

RunConfig::RunConfig() {
  const ModelConfig m;
  const TrainConfig t;
  const WorldConfig w;
  const PrepareOptions p;
  auto add = [&](const std::string& k, Type type, std::string v, std::string help) {
    entries_[k] = {type, std::move(v), std::move(help)};
  };
  add("dim", Type::Int, str(m.dim), "embedding size");
  add("heads", Type::Int, str(m.heads), "attention heads");
  add("head_dim", Type::Int, str(m.head_dim), "per-head projection size");
  add("ffn_dim", Type::Int, str(m.ffn_dim), "transformer feed-forward size");
  add("att_dim", Type::Int, str(m.att_dim), "word-attention projection size");
  add("coatt_dim", Type::Int, str(m.coatt_dim), "co-attention projection size, 0 for dim");
  add("word_layers", Type::Int, str(m.word_layers), "word-level transformer blocks");
  add("session_layers", Type::Int, str(m.session_layers), "session-level transformer blocks");
  add("history_layers", Type::Int, str(m.history_layers), "history-level transformer blocks");
  add("max_len", Type::Int, str(m.max_len), "tokens kept per text");
  add("max_sessions", Type::Int, str(m.max_sessions), "long-term sessions kept");
  add("max_session_len", Type::Int, str(m.max_session_len), "behaviors kept per session");
  add("init_seed", Type::UInt, str(m.init_seed), "parameter initialization seed");

  add("negatives", Type::Int, str(t.negatives), "negatives per training group (K)");
  add("lr", Type::Real, str(t.lr), "pretraining learning rate");
  add("finetune_lr", Type::Real, str(t.lr), "finetuning learning rate");
  add("batch", Type::Int, str(t.batch), "impressions per optimizer step");
  add("epochs", Type::Int, str(t.epochs), "pretraining epochs");
  add("finetune_epochs", Type::Int, "3", "finetuning epochs");
  add("patience", Type::Int, str(t.patience), "early-stopping patience in epochs");
  add("seed", Type::UInt, str(t.seed), "training seed");
  add("workers", Type::Int, str(t.workers), "worker threads");
  add("val_limit", Type::Int, str(t.val_limit), "validation impressions per task, 0 for all");

  add("gen.n_users", Type::Int, str(w.n_users), "synthetic users");
  add("gen.n_topics", Type::Int, str(w.n_topics), "planted topics");
  add("gen.words_per_topic", Type::Int, str(w.words_per_topic), "topic vocabulary size");
  add("gen.ambiguous_words", Type::Int, str(w.ambiguous_words), "words shared by two topics");
  add("gen.stopwords", Type::Int, str(w.stopwords), "shared stopword pool");
  add("gen.docs_per_topic", Type::Int, str(w.docs_per_topic), "documents per topic");
  add("gen.stopword_rate", Type::Real, str(w.stopword_rate), "stopword share of title tokens");
  add("gen.zipf_exponent", Type::Real, str(w.zipf_exponent), "word frequency skew inside a topic");
  add("gen.pareto_shape", Type::Real, str(w.pareto_shape), "document popularity tail");
  add("gen.session_topic_stickiness", Type::Real, str(w.session_topic_stickiness), "browse stays on the session topic");
  add("gen.preference_concentration", Type::Real, str(w.preference_concentration), "Dirichlet concentration");
  add("gen.weeks", Type::Real, str(w.weeks), "time span in weeks");
  add("gen.sessions_per_week", Type::Real, str(w.sessions_per_week), "sessions per user per week");
  add("gen.mean_session_len", Type::Real, str(w.mean_session_len), "mean planned session length");
  add("gen.search_rate", Type::Real, str(w.search_rate), "share of standalone searches");
  add("gen.p_follow", Type::Real, str(w.p_follow), "browse followed by a related search");
  add("gen.ambiguous_query_rate", Type::Real, str(w.ambiguous_query_rate), "queries using an ambiguous word");
  add("gen.seed", Type::UInt, str(w.seed), "generator seed");

  add("prepare.history_frac", Type::Real, str(p.split.history_frac), "leading share of time used as history");
  add("prepare.alpha", Type::Real, str(p.split.negatives.alpha), "pseudo-negative popularity weight");
  add("prepare.n_neg", Type::Int, str(p.split.negatives.n_neg), "pseudo negatives per browse");
  add("prepare.max_sessions", Type::Int, str(p.split.max_sessions), "long-term sessions kept in histories");
  add("prepare.max_session_len", Type::Int, str(p.split.max_session_len), "behaviors kept per history session");
  add("prepare.topics", Type::Text, "token", "pseudo-negative topic similarity: token or planted");
  add("prepare.min_count", Type::Int, str(p.min_count), "vocabulary min count");
  add("prepare.seed", Type::UInt, str(p.split.seed), "candidate shuffle seed");
}

void RunConfig::check(const std::string& key, const std::string& value) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key: " + key);
  const char* b = value.data();
  const char* e = b + value.size();
  bool ok = !value.empty();
  switch (it->second.type) {
    case Type::Int: {
      long long v = 0;
      auto r = std::from_chars(b, e, v);
      ok = ok && r.ec == std::errc() && r.ptr == e && v >= 0;
      break;
    }
    case Type::UInt: {
      unsigned long long v = 0;
      auto r = std::from_chars(b, e, v);
      ok = ok && r.ec == std::errc() && r.ptr == e;
      break;
    }
    case Type::Real: {
      try {
        std::size_t used = 0;
        (void)std::stod(value, &used);
        ok = ok && used == value.size();
      } catch (const std::exception&) {
        ok = false;
      }
      break;
    }
    case Type::Text: break;
  }
  if (!ok) throw ConfigError("invalid value for " + key + ": '" + value + "'");
  if (key == "prepare.topics" && value != "token" && value != "planted")
    throw ConfigError("prepare.topics must be token or planted");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  check(key, value);
  entries_.at(key).value = value;
}

void RunConfig::set_assignment(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + kv + "'");
  set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      set_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(no) + ": " + e.what());
    }
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key: " + key);
  return it->second.value;
}

int RunConfig::get_int(const std::string& key) const { return std::stoi(get(key)); }
double RunConfig::get_double(const std::string& key) const { return std::stod(get(key)); }
std::uint64_t RunConfig::get_u64(const std::string& key) const { return std::stoull(get(key)); }

std::string RunConfig::echo() const {
  std::ostringstream s;
  for (const auto& [k, e] : entries_) s << k << " = " << e.value << '\n';
  return s.str();
}

void RunConfig::write_echo(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "config.echo");
  if (!out) throw Error("cannot write " + (dir / "config.echo").string());
  out << echo();
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, e] : RunConfig().entries_) out.push_back(k);
  return out;
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.dim = get_int("dim");
  m.heads = get_int("heads");
  m.head_dim = get_int("head_dim");
  m.ffn_dim = get_int("ffn_dim");
  m.att_dim = get_int("att_dim");
  m.coatt_dim = get_int("coatt_dim");
  m.word_layers = get_int("word_layers");
  m.session_layers = get_int("session_layers");
  m.history_layers = get_int("history_layers");
  m.max_len = get_int("max_len");
  m.max_sessions = get_int("max_sessions");
  m.max_session_len = get_int("max_session_len");
  m.init_seed = get_u64("init_seed");
  if (m.dim < 1 || m.heads < 1 || m.head_dim < 1 || m.ffn_dim < 1 || m.att_dim < 1)
    throw ConfigError("model sizes must be positive");
  if (m.max_len < 1 || m.max_sessions < 1 || m.max_session_len < 1) throw ConfigError("length limits must be positive");
  return m;
}

TrainConfig RunConfig::pretrain() const {
  TrainConfig t;
  t.negatives = static_cast<std::size_t>(get_int("negatives"));
  t.lr = get_double("lr");
  t.batch = static_cast<std::size_t>(get_int("batch"));
  t.epochs = get_int("epochs");
  t.patience = get_int("patience");
  t.seed = get_u64("seed");
  t.workers = get_int("workers");
  t.val_limit = static_cast<std::size_t>(get_int("val_limit"));
  if (t.negatives < 1) throw ConfigError("negatives must be at least 1");
  if (t.batch < 1) throw ConfigError("batch must be at least 1");
  if (!(t.lr > 0)) throw ConfigError("lr must be positive");
  if (t.workers < 1) throw ConfigError("workers must be at least 1");
  return t;
}

TrainConfig RunConfig::finetune() const {
  TrainConfig t = pretrain();
  t.lr = get_double("finetune_lr");
  t.epochs = get_int("finetune_epochs");
  t.eval_initial = true;
  if (!(t.lr > 0)) throw ConfigError("finetune_lr must be positive");
  return t;
}

WorldConfig RunConfig::world() const {
  WorldConfig w;
  w.n_users = static_cast<std::size_t>(get_int("gen.n_users"));
  w.n_topics = static_cast<std::size_t>(get_int("gen.n_topics"));
  w.words_per_topic = static_cast<std::size_t>(get_int("gen.words_per_topic"));
  w.ambiguous_words = static_cast<std::size_t>(get_int("gen.ambiguous_words"));
  w.stopwords = static_cast<std::size_t>(get_int("gen.stopwords"));
  w.docs_per_topic = static_cast<std::size_t>(get_int("gen.docs_per_topic"));
  w.stopword_rate = get_double("gen.stopword_rate");
  w.zipf_exponent = get_double("gen.zipf_exponent");
  w.pareto_shape = get_double("gen.pareto_shape");
  w.session_topic_stickiness = get_double("gen.session_topic_stickiness");
  w.preference_concentration = get_double("gen.preference_concentration");
  w.weeks = get_double("gen.weeks");
  w.sessions_per_week = get_double("gen.sessions_per_week");
  w.mean_session_len = get_double("gen.mean_session_len");
  w.search_rate = get_double("gen.search_rate");
  w.p_follow = get_double("gen.p_follow");
  w.ambiguous_query_rate = get_double("gen.ambiguous_query_rate");
  w.seed = get_u64("gen.seed");
  w.validate();
  return w;
}

PrepareOptions RunConfig::prepare() const {
  PrepareOptions p;
  p.split.history_frac = get_double("prepare.history_frac");
  p.split.negatives.alpha = get_double("prepare.alpha");
  p.split.negatives.n_neg = static_cast<std::size_t>(get_int("prepare.n_neg"));
  p.split.max_sessions = static_cast<std::size_t>(get_int("prepare.max_sessions"));
  p.split.max_session_len = static_cast<std::size_t>(get_int("prepare.max_session_len"));
  p.split.seed = get_u64("prepare.seed");
  p.topics = get("prepare.topics") == "planted" ? TopicRepresentation::PlantedTopic : TopicRepresentation::TokenEmbedding;
  p.min_count = static_cast<std::size_t>(get_int("prepare.min_count"));
  if (!(p.split.history_frac >= 0 && p.split.history_frac < 1)) throw ConfigError("prepare.history_frac must lie in [0, 1)");
  if (!(p.split.negatives.alpha >= 0 && p.split.negatives.alpha <= 1)) throw ConfigError("prepare.alpha must lie in [0, 1]");
  if (p.split.negatives.n_neg < 1) throw ConfigError("prepare.n_neg must be at least 1");
  return p;
}

}  // namespace user
