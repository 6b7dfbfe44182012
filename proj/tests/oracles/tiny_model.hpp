#pragma once

// A small double-precision model and impressions that exercise every input
// path: browses, searches with one and several clicks, unclicked searches
// and overlong sessions.

#include <string>
#include <vector>

#include "user/common/rng.hpp"
#include "user/model/user_model.hpp"
#include "../unit/support.hpp"

namespace user::testing {

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.dim = 8;
  c.heads = 2;
  c.head_dim = 4;
  c.ffn_dim = 6;
  c.att_dim = 5;
  c.max_len = 6;
  c.max_sessions = 3;
  c.max_session_len = 3;
  c.init_seed = 11;
  return c;
}

inline Vocab tiny_vocab() {
  return Vocab::build({"solar panel price", "electric car battery", "new energy vehicle", "garden tools sale",
                       "cheap flights paris", "battery recycling plant"});
}

/// Replaces every parameter with a draw in [-scale, scale] and layer-norm
/// gains with draws around one, so that no term is trivially zero.
inline void scramble(ad::ParamStore<double>& store, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  for (auto& p : store) {
    const bool gain = p.name.find(".gain") != std::string::npos;
    for (Eigen::Index i = 0; i < p.value.size(); ++i)
      p.value.data()[i] = (gain ? 1.0 : 0.0) + rng.uniform(-scale, scale);
  }
}

inline UserModel<double> tiny_model(std::uint64_t seed = 3, const ModelConfig& cfg = tiny_config()) {
  UserModel<double> m(cfg, tiny_vocab(), {"u1", "u2"});
  scramble(m.params(), seed);
  return m;
}

inline Session session_of(std::vector<Behavior> bs) {
  Session s;
  s.behaviors = std::move(bs);
  return s;
}

inline UserHistory tiny_history() {
  const auto d1 = doc("d1", "solar panel price");
  const auto d2 = doc("d2", "electric car battery");
  const auto d3 = doc("d3", "garden tools sale");
  const auto d4 = doc("d4", "battery recycling plant zebra");
  UserHistory h;
  h.long_term.push_back(session_of({browse("u1", 10, d1), search("u1", 20, "solar price", {{d1, true, 60}, {d2}})}));
  h.long_term.push_back(session_of({search("u1", 4000, "car", {{d2}, {d3}})}));  // no click: skipped
  h.long_term.push_back(session_of({browse("u1", 9000, d3), browse("u1", 9010, d4), browse("u1", 9020, d1),
                                    browse("u1", 9030, d2)}));  // one over the session limit
  h.long_term.push_back(
      session_of({search("u1", 20000, "battery", {{d2, true, 40}, {d4, true, 5}}), browse("u1", 20010, d3)}));
  h.current = session_of({browse("u1", 30000, d2), search("u1", 30010, "new energy", {{d4, true, 90}})});
  return h;
}

inline std::vector<Document> tiny_candidates() {
  return {doc("c0", "electric vehicle battery"), doc("c1", "cheap flights paris"), doc("c2", "solar solar panel"),
          doc("c3", "zebra"), doc("c4", "garden tools")};
}

inline Impression tiny_search() {
  Impression imp;
  imp.id = "s";
  imp.user = "u1";
  imp.ts = 30020;
  imp.task = Task::Search;
  imp.query = "battery price for new car";
  imp.candidates = tiny_candidates();
  imp.labels = {1, 0, 0, 0, 0};
  imp.history = tiny_history();
  for (std::size_t i = 0; i < imp.candidates.size(); ++i)
    imp.features.push_back({0.1 * static_cast<double>(i), 0.5, std::log1p(static_cast<double>(i % 2)), 1.0});
  return imp;
}

inline Impression tiny_recommend() {
  Impression imp = tiny_search();
  imp.id = "r";
  imp.task = Task::Recommend;
  imp.query.clear();
  imp.features.assign(imp.candidates.size(), FeatureVector{});
  return imp;
}

}  // namespace user::testing
