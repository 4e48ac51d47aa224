#pragma once

#include <span>
#include <vector>

namespace pbs {

// One (state, action, reward, reward-to-go) tuple as discrete tokens.
struct TokenizedTransition {
  std::vector<int> state_tokens;
  std::vector<int> action_tokens;
  int reward_token = 0;
  int rtg_token = 0;

  int size() const { return static_cast<int>(state_tokens.size() + action_tokens.size()) + 2; }

  void flatten_into(std::vector<int>& out) const;
  static TokenizedTransition from_flat(std::span<const int> tokens, int state_dim, int action_dim);

  bool operator==(const TokenizedTransition&) const = default;
};

struct Trajectory {
  std::vector<int> origin_state;  // start tokens x
  std::vector<TokenizedTransition> transitions;

  int depth() const { return static_cast<int>(transitions.size()); }
  int token_length() const;

  // Flattened token view of the transitions (round-trip equal to the
  // transition view).
  std::vector<int> flat_tokens() const;
  static Trajectory from_flat(std::span<const int> tokens, int state_dim, int action_dim);
};

}  // namespace pbs
