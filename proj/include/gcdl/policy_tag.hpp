#pragma once

#include <string>

namespace gcdl {

enum class PolicyTag { NonCooperative, ZeroVelocity, GA3C_CADRL, CADRL_Lookahead };

const char* to_string(PolicyTag tag);
PolicyTag policy_tag_from_string(const std::string& s);

/// True for policies that need a loaded network.
inline bool needs_network(PolicyTag tag) {
  return tag == PolicyTag::GA3C_CADRL || tag == PolicyTag::CADRL_Lookahead;
}

}  // namespace gcdl
