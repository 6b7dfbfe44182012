#pragma once

#include <cstdint>
#include <string>

namespace user {

/// Architecture hyper-parameters. Defaults follow the published setup where
/// it is unambiguous (embedding size 100, 30-token texts, 20 sessions of at
/// most 5 behaviors).
struct ModelConfig {
  int dim = 100;            // word / behavior / user embedding size
  int heads = 4;            // attention heads in every transformer block
  int head_dim = 25;        // per-head projection size
  int ffn_dim = 50;         // transformer feed-forward hidden size
  int att_dim = 50;         // word-attention projection size
  int coatt_dim = 0;        // co-attention projection size (0: same as dim)
  int word_layers = 1;
  int session_layers = 1;
  int history_layers = 1;
  int max_len = 30;
  int max_sessions = 20;
  int max_session_len = 5;
  std::uint64_t init_seed = 7;

  int coattention_dim() const { return coatt_dim > 0 ? coatt_dim : dim; }
  int history_positions() const { return max_sessions * max_session_len + 1; }

  /// Stable description of every shape-affecting field.
  std::string describe() const;
};

}  // namespace user
