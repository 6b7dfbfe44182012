#pragma once

#include <cstdint>
#include <vector>

#include "user/log/types.hpp"

namespace user {

inline constexpr std::int64_t kSessionGapSeconds = 1800;
inline constexpr std::int64_t kSatClickDwellSeconds = 30;

/// Splits one user's time-ordered events into sessions. A new session starts
/// exactly when the gap to the previous event exceeds `gap_s`. Throws on
/// unsorted input.
std::vector<Session> segment_sessions(const std::vector<Behavior>& events, std::int64_t gap_s = kSessionGapSeconds);

/// 1 iff the result was clicked with dwell strictly above 30 seconds.
inline int label_sat_click(bool clicked, std::int64_t dwell_seconds) {
  return clicked && dwell_seconds > kSatClickDwellSeconds ? 1 : 0;
}

}  // namespace user
