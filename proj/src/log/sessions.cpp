#include "user/log/sessions.hpp"

#include "user/common/error.hpp"

namespace user {

std::vector<Session> segment_sessions(const std::vector<Behavior>& events, std::int64_t gap_s) {
  std::vector<Session> sessions;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i > 0 && events[i].ts < events[i - 1].ts)
      throw Error("segment_sessions: events not sorted at index " + std::to_string(i));
    if (i == 0 || events[i].ts - events[i - 1].ts > gap_s) sessions.emplace_back();
    sessions.back().behaviors.push_back(events[i]);
  }
  return sessions;
}

}  // namespace user
