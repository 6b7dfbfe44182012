#pragma once

#include <string>
#include <vector>

#include "user/log/types.hpp"

namespace user::testing {

inline Document doc(std::string id, std::string title, double pop = 0.0) {
  Document d;
  d.id = std::move(id);
  d.title = std::move(title);
  d.popularity = pop;
  return d;
}

inline Behavior browse(std::string user, std::int64_t ts, Document d) {
  Behavior b;
  b.user = std::move(user);
  b.ts = ts;
  b.kind = BehaviorKind::Browse;
  b.doc = std::move(d);
  return b;
}

struct Click {
  Document doc;
  bool clicked = false;
  std::int64_t dwell = 0;
};

inline Behavior search(std::string user, std::int64_t ts, std::string query, const std::vector<Click>& results) {
  Behavior b;
  b.user = std::move(user);
  b.ts = ts;
  b.kind = BehaviorKind::Search;
  b.query = std::move(query);
  for (const auto& c : results) b.results.push_back({c.doc, c.clicked, c.dwell});
  return b;
}

}  // namespace user::testing
