#include "pbs/env.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "pbs/decode.hpp"

namespace pbs {

namespace {

int sample_index(const std::vector<double>& probs, std::mt19937_64& rng) {
  const double u = (rng() >> 11) * 0x1.0p-53;
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

void check_distribution(const std::vector<double>& probs, double tol, const char* what) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument(std::string(what) + ": negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > tol)
    throw std::invalid_argument(std::string(what) + ": row does not sum to 1");
}

}  // namespace

void TabularMdp::validate() const {
  if (n_states < 1 || n_actions < 1 || horizon < 1)
    throw std::invalid_argument("mdp: empty state/action space or horizon");
  if (static_cast<int>(rho0.size()) != n_states) throw std::invalid_argument("mdp: bad rho0 size");
  check_distribution(rho0, 1e-12, "mdp rho0");
  if (static_cast<int>(p.size()) != n_states || static_cast<int>(reward.size()) != n_states)
    throw std::invalid_argument("mdp: bad table sizes");
  for (int s = 0; s < n_states; ++s) {
    if (static_cast<int>(p[s].size()) != n_actions ||
        static_cast<int>(reward[s].size()) != n_actions)
      throw std::invalid_argument("mdp: bad table sizes");
    for (int a = 0; a < n_actions; ++a) {
      if (static_cast<int>(p[s][a].size()) != n_states)
        throw std::invalid_argument("mdp: bad transition row size");
      check_distribution(p[s][a], 1e-12, "mdp transition row");
    }
  }
  if (static_cast<int>(state_embed.size()) != n_states ||
      static_cast<int>(action_embed.size()) != n_actions)
    throw std::invalid_argument("mdp: bad embedding sizes");
}

int TabularMdp::nearest_action(double value) const {
  int best = 0;
  double best_d = std::abs(action_embed[0] - value);
  for (int a = 1; a < n_actions; ++a) {
    const double d = std::abs(action_embed[a] - value);
    if (d < best_d) {
      best_d = d;
      best = a;
    }
  }
  return best;
}

std::string TabularMdp::to_json_string() const {
  nlohmann::json j;
  j["n_states"] = n_states;
  j["n_actions"] = n_actions;
  j["horizon"] = horizon;
  j["rho0"] = rho0;
  j["p"] = p;
  j["reward"] = reward;
  j["state_embed"] = state_embed;
  j["action_embed"] = action_embed;
  return j.dump(2);
}

TabularMdp TabularMdp::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TabularMdp mdp;
  mdp.n_states = j.at("n_states").get<int>();
  mdp.n_actions = j.at("n_actions").get<int>();
  mdp.horizon = j.at("horizon").get<int>();
  mdp.rho0 = j.at("rho0").get<std::vector<double>>();
  mdp.p = j.at("p").get<std::vector<std::vector<std::vector<double>>>>();
  mdp.reward = j.at("reward").get<std::vector<std::vector<double>>>();
  mdp.state_embed = j.at("state_embed").get<std::vector<std::vector<double>>>();
  mdp.action_embed = j.at("action_embed").get<std::vector<double>>();
  mdp.validate();
  return mdp;
}

void TabularMdp::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mdp file: " + path);
  out << to_json_string() << "\n";
}

TabularMdp TabularMdp::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read mdp file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

void BehaviorPolicy::validate(const TabularMdp& mdp) const {
  if (static_cast<int>(probs.size()) != mdp.n_states)
    throw std::invalid_argument("policy: bad table size");
  for (const auto& row : probs) {
    if (static_cast<int>(row.size()) != mdp.n_actions)
      throw std::invalid_argument("policy: bad row size");
    check_distribution(row, 1e-9, "policy row");
  }
}

BehaviorPolicy make_uniform_policy(const TabularMdp& mdp) {
  BehaviorPolicy pi;
  pi.probs.assign(mdp.n_states,
                  std::vector<double>(mdp.n_actions, 1.0 / mdp.n_actions));
  return pi;
}

BehaviorPolicy make_fixed_action_policy(const TabularMdp& mdp, int action) {
  BehaviorPolicy pi;
  pi.probs.assign(mdp.n_states, std::vector<double>(mdp.n_actions, 0.0));
  for (auto& row : pi.probs) row.at(action) = 1.0;
  return pi;
}

RiskyChain make_risky_chain(const RiskyChainSpec& spec) {
  if (spec.corridor_len < 2) throw std::invalid_argument("risky chain: corridor_len must be >= 2");
  const int len = spec.corridor_len;
  // Layout: 0 start; 1..len corridor A; len+1..2*len-1 corridor B interior;
  // 2*len good end; 2*len+1 crash end; 2*len+2 corridor C (absorbing).
  const int a0 = 1;
  const int b0 = len + 1;
  const int b_good = 2 * len;
  const int b_crash = 2 * len + 1;
  const int c0 = 2 * len + 2;

  RiskyChain chain;
  chain.spec = spec;
  TabularMdp& mdp = chain.mdp;
  mdp.n_states = c0 + 1;
  mdp.n_actions = 3;
  mdp.horizon = len + 1;
  mdp.rho0.assign(mdp.n_states, 0.0);
  mdp.rho0[0] = 1.0;

  auto deterministic = [&](int s_next) {
    std::vector<double> row(mdp.n_states, 0.0);
    row[s_next] = 1.0;
    return row;
  };

  mdp.p.assign(mdp.n_states, {});
  mdp.reward.assign(mdp.n_states, std::vector<double>(mdp.n_actions, 0.0));
  for (int s = 0; s < mdp.n_states; ++s) mdp.p[s].assign(mdp.n_actions, deterministic(s));

  // start: the action picks the corridor
  mdp.p[0][chain.safe_action] = deterministic(a0);
  mdp.p[0][chain.risky_action] = deterministic(b0);
  mdp.p[0][chain.bad_action] = deterministic(c0);

  for (int a = 0; a < mdp.n_actions; ++a) {
    // corridor A: deterministic chain, absorbing at its end
    for (int i = 0; i < len - 1; ++i) mdp.p[a0 + i][a] = deterministic(a0 + i + 1);
    for (int i = 0; i < len; ++i) mdp.reward[a0 + i][a] = spec.r_safe;

    // corridor B: chain ending in a stochastic cliff
    for (int i = 0; i < len - 2; ++i) mdp.p[b0 + i][a] = deterministic(b0 + i + 1);
    std::vector<double> cliff(mdp.n_states, 0.0);
    cliff[b_good] = 1.0 - spec.p_crash;
    cliff[b_crash] = spec.p_crash;
    mdp.p[b0 + len - 2][a] = cliff;
    for (int i = 0; i < len - 1; ++i) mdp.reward[b0 + i][a] = spec.r_risky;
    mdp.reward[b_good][a] = spec.r_risky;
    mdp.reward[b_crash][a] = spec.crash_reward;

    // corridor C: absorbing, plainly bad
    mdp.reward[c0][a] = spec.r_bad;
  }

  // Embed states on a small grid (K = 2) and actions on a line (M = 1).
  mdp.state_embed.assign(mdp.n_states, {0.0, 0.0});
  for (int i = 0; i < len; ++i) mdp.state_embed[a0 + i] = {double(i + 1), 1.0};
  for (int i = 0; i < len - 1; ++i) mdp.state_embed[b0 + i] = {double(i + 1), 2.0};
  mdp.state_embed[b_good] = {double(len), 2.0};
  mdp.state_embed[b_crash] = {double(len), -2.0};
  mdp.state_embed[c0] = {1.0, 3.0};
  mdp.action_embed = {0.0, 1.0, 2.0};
  mdp.validate();

  // Behavior policy: safe-biased at the start, indifferent elsewhere.
  chain.behavior = make_uniform_policy(mdp);
  chain.behavior.probs[0] = {1.0 - spec.coverage_risky - spec.coverage_bad, spec.coverage_risky,
                             spec.coverage_bad};
  chain.behavior.validate(mdp);
  return chain;
}

std::vector<Episode> generate_dataset(const TabularMdp& mdp, const BehaviorPolicy& policy,
                                      int episodes, uint64_t seed) {
  mdp.validate();
  policy.validate(mdp);
  if (episodes < 1) throw std::invalid_argument("generate_dataset: episodes must be >= 1");

  std::vector<Episode> out;
  out.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    std::mt19937_64 rng(derive_stream(seed, 0x646174ULL, e, 0));
    Episode ep;
    int s = sample_index(mdp.rho0, rng);
    for (int t = 0; t < mdp.horizon; ++t) {
      const int a = sample_index(policy.probs[s], rng);
      Step step;
      step.state = mdp.embed_state(s);
      step.action = {mdp.action_embed[a]};
      step.reward = mdp.reward[s][a];
      ep.push_back(std::move(step));
      s = sample_index(mdp.p[s][a], rng);
    }
    out.push_back(std::move(ep));
  }
  return out;
}

std::vector<double> exact_policy_value(const TabularMdp& mdp, const BehaviorPolicy& policy,
                                       double gamma) {
  mdp.validate();
  policy.validate(mdp);
  std::vector<double> value(mdp.n_states, 0.0);
  for (int t = mdp.horizon - 1; t >= 0; --t) {
    std::vector<double> next(mdp.n_states, 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
      double v = 0.0;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double q = mdp.reward[s][a];
        for (int s2 = 0; s2 < mdp.n_states; ++s2) q += gamma * mdp.p[s][a][s2] * value[s2];
        v += policy.probs[s][a] * q;
      }
      next[s] = v;
    }
    value = std::move(next);
  }
  return value;
}

std::vector<RolloutResult> rollout(const TabularMdp& mdp, const Planner& planner, int episodes,
                                   uint64_t seed) {
  mdp.validate();
  std::vector<RolloutResult> results;
  results.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    std::mt19937_64 rng(derive_stream(seed, 0x726f6cULL, e, 0));
    RolloutResult res;
    int s = sample_index(mdp.rho0, rng);
    try {
      for (int t = 0; t < mdp.horizon; ++t) {
        const std::vector<double> state = mdp.embed_state(s);
        const std::vector<double> action = planner(res.episode, state);
        if (action.empty()) throw std::runtime_error("planner returned an empty action");
        const int a = mdp.nearest_action(action[0]);
        Step step;
        step.state = state;
        step.action = {mdp.action_embed[a]};
        step.reward = mdp.reward[s][a];
        res.total_return += step.reward;
        res.episode.push_back(std::move(step));
        s = sample_index(mdp.p[s][a], rng);
      }
    } catch (const std::exception& ex) {
      res.failed = true;
      res.error = ex.what();
    }
    results.push_back(std::move(res));
  }
  return results;
}

}  // namespace pbs
