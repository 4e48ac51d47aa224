#include "pbs/trajectory.hpp"

#include <stdexcept>

namespace pbs {

void TokenizedTransition::flatten_into(std::vector<int>& out) const {
  out.insert(out.end(), state_tokens.begin(), state_tokens.end());
  out.insert(out.end(), action_tokens.begin(), action_tokens.end());
  out.push_back(reward_token);
  out.push_back(rtg_token);
}

TokenizedTransition TokenizedTransition::from_flat(std::span<const int> tokens, int state_dim,
                                                   int action_dim) {
  if (static_cast<int>(tokens.size()) != state_dim + action_dim + 2)
    throw std::invalid_argument("from_flat: wrong token count for one transition");
  TokenizedTransition t;
  t.state_tokens.assign(tokens.begin(), tokens.begin() + state_dim);
  t.action_tokens.assign(tokens.begin() + state_dim, tokens.begin() + state_dim + action_dim);
  t.reward_token = tokens[state_dim + action_dim];
  t.rtg_token = tokens[state_dim + action_dim + 1];
  return t;
}

int Trajectory::token_length() const {
  int n = 0;
  for (const auto& t : transitions) n += t.size();
  return n;
}

std::vector<int> Trajectory::flat_tokens() const {
  std::vector<int> out;
  out.reserve(token_length());
  for (const auto& t : transitions) t.flatten_into(out);
  return out;
}

Trajectory Trajectory::from_flat(std::span<const int> tokens, int state_dim, int action_dim) {
  const int per = state_dim + action_dim + 2;
  if (tokens.size() % per != 0)
    throw std::invalid_argument("from_flat: token count not a multiple of transition size");
  Trajectory traj;
  for (size_t i = 0; i < tokens.size(); i += per)
    traj.transitions.push_back(
        TokenizedTransition::from_flat(tokens.subspan(i, per), state_dim, action_dim));
  if (!traj.transitions.empty()) traj.origin_state = traj.transitions.front().state_tokens;
  return traj;
}

}  // namespace pbs
