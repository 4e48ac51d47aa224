#include "pbs/episode_io.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace pbs {

void annotate_rtg(Episode& episode, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  double acc = 0.0;
  for (auto it = episode.rbegin(); it != episode.rend(); ++it) {
    if (!std::isfinite(it->reward)) throw std::invalid_argument("non-finite reward");
    acc = it->reward + gamma * acc;
    it->rtg = acc;
  }
}

namespace {

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void absorb(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  ChannelSpec to_channel(int bins, const char* name) const {
    constexpr double kEps = 1e-6;
    Range r = *this;
    if (r.lo == r.hi) {
      std::cerr << "warning: zero-width channel '" << name << "', widening by " << kEps << "\n";
      r.lo -= kEps;
      r.hi += kEps;
    }
    return ChannelSpec{bins, r.lo, r.hi};
  }
};

}  // namespace

DiscretizerSpec fit_discretizer(const std::vector<Episode>& episodes, int bins_per_dim) {
  if (episodes.empty() || episodes.front().empty())
    throw std::invalid_argument("fit_discretizer: empty dataset");
  const size_t k = episodes.front().front().state.size();
  const size_t m = episodes.front().front().action.size();

  std::vector<Range> state(k), action(m);
  Range reward, rtg;
  for (const auto& ep : episodes) {
    for (const auto& s : ep) {
      if (s.state.size() != k || s.action.size() != m)
        throw std::invalid_argument("fit_discretizer: inconsistent episode dimensions");
      for (size_t d = 0; d < k; ++d) state[d].absorb(s.state[d]);
      for (size_t d = 0; d < m; ++d) action[d].absorb(s.action[d]);
      reward.absorb(s.reward);
      rtg.absorb(s.rtg);
    }
  }

  std::vector<ChannelSpec> sc, ac;
  for (size_t d = 0; d < k; ++d) sc.push_back(state[d].to_channel(bins_per_dim, "state"));
  for (size_t d = 0; d < m; ++d) ac.push_back(action[d].to_channel(bins_per_dim, "action"));
  return DiscretizerSpec(std::move(sc), std::move(ac), reward.to_channel(bins_per_dim, "reward"),
                         rtg.to_channel(bins_per_dim, "rtg"));
}

Trajectory tokenize_episode(const Episode& episode, const DiscretizerSpec& spec) {
  const size_t k = spec.state_dim();
  const size_t m = spec.action_dim();
  Trajectory traj;
  for (const auto& s : episode) {
    if (s.state.size() != k || s.action.size() != m)
      throw std::invalid_argument("tokenize_episode: dimension mismatch with discretizer");
    TokenizedTransition t;
    for (size_t d = 0; d < k; ++d) t.state_tokens.push_back(spec.state_channel(d).encode(s.state[d]));
    for (size_t d = 0; d < m; ++d)
      t.action_tokens.push_back(spec.action_channel(d).encode(s.action[d]));
    t.reward_token = spec.reward_channel().encode(s.reward);
    t.rtg_token = spec.rtg_channel().encode(s.rtg);
    traj.transitions.push_back(std::move(t));
  }
  if (!traj.transitions.empty()) traj.origin_state = traj.transitions.front().state_tokens;
  return traj;
}

Episode detokenize(const Trajectory& trajectory, const DiscretizerSpec& spec) {
  Episode ep;
  for (const auto& t : trajectory.transitions) {
    Step s;
    for (size_t d = 0; d < t.state_tokens.size(); ++d)
      s.state.push_back(spec.state_channel(d).decode(t.state_tokens[d]));
    for (size_t d = 0; d < t.action_tokens.size(); ++d)
      s.action.push_back(spec.action_channel(d).decode(t.action_tokens[d]));
    s.reward = spec.reward_channel().decode(t.reward_token);
    s.rtg = spec.rtg_channel().decode(t.rtg_token);
    ep.push_back(std::move(s));
  }
  return ep;
}

void save_episodes(const std::vector<Episode>& episodes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write episode file: " + path);
  for (const auto& ep : episodes) {
    nlohmann::json j;
    auto& states = j["states"] = nlohmann::json::array();
    auto& actions = j["actions"] = nlohmann::json::array();
    auto& rewards = j["rewards"] = nlohmann::json::array();
    for (const auto& s : ep) {
      states.push_back(s.state);
      actions.push_back(s.action);
      rewards.push_back(s.reward);
    }
    out << j.dump() << "\n";
  }
}

std::vector<Episode> load_episodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read episode file: " + path);
  std::vector<Episode> episodes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    const auto& states = j.at("states");
    const auto& actions = j.at("actions");
    const auto& rewards = j.at("rewards");
    if (states.size() != actions.size() || states.size() != rewards.size())
      throw std::runtime_error("episode record with mismatched field lengths in " + path);
    Episode ep;
    for (size_t i = 0; i < states.size(); ++i) {
      Step s;
      s.state = states[i].get<std::vector<double>>();
      s.action = actions[i].get<std::vector<double>>();
      s.reward = rewards[i].get<double>();
      ep.push_back(std::move(s));
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

}  // namespace pbs
