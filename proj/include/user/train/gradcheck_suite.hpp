#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "user/log/types.hpp"
#include "user/numerics/grad_check.hpp"

namespace user {

struct GradCheckEntry {
  std::string module;
  ad::GradCheckResult result;
};

/// Small fixture impressions (one search, one recommendation) with short
/// multi-session histories, over a fixed toy vocabulary.
std::vector<Impression> gradcheck_fixture();

/// Central-difference checks of every parameterized component in 64-bit at
/// embedding size `dim`.
std::vector<GradCheckEntry> run_gradcheck_suite(int dim = 8, std::uint64_t seed = 1, std::size_t samples = 16);

}  // namespace user
