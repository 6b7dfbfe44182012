#include "user/model/config.hpp"

#include <sstream>

namespace user {

std::string ModelConfig::describe() const {
  std::ostringstream s;
  s << "dim=" << dim << ";heads=" << heads << ";head_dim=" << head_dim << ";ffn_dim=" << ffn_dim
    << ";att_dim=" << att_dim << ";coatt_dim=" << coattention_dim() << ";word_layers=" << word_layers
    << ";session_layers=" << session_layers << ";history_layers=" << history_layers << ";max_len=" << max_len
    << ";max_sessions=" << max_sessions << ";max_session_len=" << max_session_len;
  return s.str();
}

}  // namespace user
