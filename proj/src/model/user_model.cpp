#include "user/model/user_model.hpp"

#include <fstream>

namespace user {

const char* tag_name(ModelTag t) {
  switch (t) {
    case ModelTag::Unified: return "unified";
    case ModelTag::Search: return "search";
    case ModelTag::Recommend: return "recommend";
  }
  return "unified";
}

ModelTag parse_tag(const std::string& s) {
  if (s == "unified") return ModelTag::Unified;
  if (s == "search") return ModelTag::Search;
  if (s == "recommend") return ModelTag::Recommend;
  throw ConfigError("unknown model task tag: " + s);
}

nlohmann::json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["dim"] = c.dim;
  j["heads"] = c.heads;
  j["head_dim"] = c.head_dim;
  j["ffn_dim"] = c.ffn_dim;
  j["att_dim"] = c.att_dim;
  j["coatt_dim"] = c.coatt_dim;
  j["word_layers"] = c.word_layers;
  j["session_layers"] = c.session_layers;
  j["history_layers"] = c.history_layers;
  j["max_len"] = c.max_len;
  j["max_sessions"] = c.max_sessions;
  j["max_session_len"] = c.max_session_len;
  j["init_seed"] = c.init_seed;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.dim = j.at("dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.head_dim = j.at("head_dim").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.att_dim = j.at("att_dim").get<int>();
  c.coatt_dim = j.at("coatt_dim").get<int>();
  c.word_layers = j.at("word_layers").get<int>();
  c.session_layers = j.at("session_layers").get<int>();
  c.history_layers = j.at("history_layers").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.max_sessions = j.at("max_sessions").get<int>();
  c.max_session_len = j.at("max_session_len").get<int>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

void write_sidecar(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text << "\n";
}

nlohmann::json read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace user
