#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pbs/episode_io.hpp"

namespace pbs {

// Finite-horizon tabular MDP with a fixed embedding of state/action ids
// into low-dimensional real vectors, so the full tokenization path is
// exercised without a physics engine.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  int horizon = 1;
  std::vector<double> rho0;                        // initial distribution
  std::vector<std::vector<std::vector<double>>> p;  // [s][a][s']
  std::vector<std::vector<double>> reward;          // [s][a]
  std::vector<std::vector<double>> state_embed;     // [s] -> R^K
  std::vector<double> action_embed;                 // [a] -> R (M = 1)

  void validate() const;
  int state_dim() const { return state_embed.empty() ? 0 : static_cast<int>(state_embed[0].size()); }
  std::vector<double> embed_state(int s) const { return state_embed.at(s); }
  int nearest_action(double value) const;

  std::string to_json_string() const;
  static TabularMdp from_json_string(const std::string& text);
  void save(const std::string& path) const;
  static TabularMdp load(const std::string& path);
};

struct BehaviorPolicy {
  std::vector<std::vector<double>> probs;  // [s][a], rows sum to 1

  void validate(const TabularMdp& mdp) const;
};

BehaviorPolicy make_uniform_policy(const TabularMdp& mdp);
BehaviorPolicy make_fixed_action_policy(const TabularMdp& mdp, int action);

// Two corridors from a shared start plus a well-covered bad corridor that
// anchors the reward range. Corridor A is safe and deterministic;
// corridor B has a higher per-step reward but a low-probability crash at
// its end; corridor C is plainly bad and well represented in the data.
struct RiskyChainSpec {
  double r_safe = 0.5;
  double r_risky = 1.5;
  double r_bad = -20.0;
  double crash_reward = -120.0;
  double p_crash = 0.05;
  double coverage_risky = 0.15;  // fraction of behavior episodes entering B
  double coverage_bad = 0.20;
  int corridor_len = 5;
};

struct RiskyChain {
  TabularMdp mdp;
  BehaviorPolicy behavior;
  RiskyChainSpec spec;
  int start_state = 0;
  int safe_action = 0;
  int risky_action = 1;
  int bad_action = 2;
};

RiskyChain make_risky_chain(const RiskyChainSpec& spec = {});

std::vector<Episode> generate_dataset(const TabularMdp& mdp, const BehaviorPolicy& policy,
                                      int episodes, uint64_t seed);

// Bellman expectation recursion by backward induction; returns V_0 per
// state.
std::vector<double> exact_policy_value(const TabularMdp& mdp, const BehaviorPolicy& policy,
                                       double gamma);

using Planner =
    std::function<std::vector<double>(const Episode& history, const std::vector<double>& state)>;

struct RolloutResult {
  double total_return = 0.0;  // undiscounted
  bool failed = false;
  std::string error;
  Episode episode;
};

// Closed-loop receding-horizon evaluation; planner failures mark the
// episode failed instead of aborting the batch.
std::vector<RolloutResult> rollout(const TabularMdp& mdp, const Planner& planner, int episodes,
                                   uint64_t seed);

}  // namespace pbs
