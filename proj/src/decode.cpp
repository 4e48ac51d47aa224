#include "pbs/decode.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace pbs {

Strategy strategy_from_string(const std::string& name) {
  if (name == "pbs") return Strategy::kPbs;
  if (name == "reward_greedy") return Strategy::kRewardGreedy;
  if (name == "likelihood") return Strategy::kLikelihood;
  throw std::invalid_argument("unknown strategy: " + name);
}

std::string strategy_to_string(Strategy s) {
  switch (s) {
    case Strategy::kPbs: return "pbs";
    case Strategy::kRewardGreedy: return "reward_greedy";
    case Strategy::kLikelihood: return "likelihood";
  }
  throw std::logic_error("bad strategy");
}

void DecoderConfig::validate() const {
  if (beam_width < 1 || horizon < 1 || expansion_factor < 1)
    throw std::invalid_argument("decoder config: b, H, e must all be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("decoder config: gamma must be in (0, 1]");
  if (!(temperature > 0.0)) throw std::invalid_argument("decoder config: temperature must be > 0");
  if (delta < 0.0 || alpha < 0.0)
    throw std::invalid_argument("decoder config: delta and alpha must be >= 0");
}

uint64_t derive_stream(uint64_t root_seed, uint64_t a, uint64_t b, uint64_t c) {
  // splitmix64 finalizer over the combined counter
  uint64_t z = root_seed;
  for (uint64_t x : {a, b, c}) {
    z += 0x9e3779b97f4a7c15ULL + x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
  }
  return z;
}

std::vector<double> score_reward_greedy(const std::vector<BeamCandidate>& candidates,
                                        const SequenceModel&, const DecoderConfig& config) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(trajectory_mean(c.ledger, config.gamma));
  return scores;
}

std::vector<double> score_likelihood(const std::vector<BeamCandidate>& candidates,
                                     const SequenceModel&, const DecoderConfig&) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(c.cumulative_log_prob);
  return scores;
}

std::vector<double> score_pbs(const std::vector<BeamCandidate>& candidates,
                              const SequenceModel&, const DecoderConfig& config) {
  if (candidates.empty()) throw std::invalid_argument("score_pbs: no candidates");
  std::vector<MomentLedger> ledgers;
  std::vector<std::vector<int>> tokens;
  ledgers.reserve(candidates.size());
  tokens.reserve(candidates.size());
  for (const auto& c : candidates) {
    ledgers.push_back(c.ledger);
    tokens.push_back(c.trajectory.flat_tokens());
  }
  const PortfolioInputs inputs = build_portfolio_inputs(ledgers, tokens, config.gamma);
  PortfolioProblem problem{inputs.mu, inputs.covariance, config.delta, config.alpha,
                           config.reg_sign};
  const PortfolioSolution sol = solve_portfolio(problem);
  return std::vector<double>(sol.w.data(), sol.w.data() + sol.w.size());
}

std::vector<BeamCandidate> prune_topb(std::vector<BeamCandidate> candidates, int b,
                                      const std::vector<double>& scores, double gamma) {
  std::vector<size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> means(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i)
    means[i] = trajectory_mean(candidates[i].ledger, gamma);
  std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    if (scores[i] != scores[j]) return scores[i] > scores[j];
    if (means[i] != means[j]) return means[i] > means[j];
    return i < j;
  });
  std::vector<BeamCandidate> kept;
  for (size_t r = 0; r < order.size() && static_cast<int>(r) < b; ++r) {
    BeamCandidate c = std::move(candidates[order[r]]);
    c.weight = scores[order[r]];
    c.multiplicity = 1;
    kept.push_back(std::move(c));
  }
  return kept;
}

std::vector<BeamCandidate> prune_pbs(std::vector<BeamCandidate> candidates, int b,
                                     const std::vector<double>& weights, std::mt19937_64& rng) {
  if (weights.size() != candidates.size())
    throw std::invalid_argument("prune_pbs: weight/candidate size mismatch");
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("prune_pbs: weights sum to zero");

  std::vector<int> draws(candidates.size(), 0);
  for (int s = 0; s < b; ++s) {
    const double u = ((rng() >> 11) * 0x1.0p-53) * total;
    double acc = 0.0;
    size_t pick = candidates.size() - 1;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    draws[pick] += 1;
  }

  std::vector<BeamCandidate> kept;
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (draws[i] == 0) continue;
    BeamCandidate c = std::move(candidates[i]);
    c.multiplicity = draws[i];
    c.weight = weights[i];
    kept.push_back(std::move(c));
  }
  return kept;
}

ScoreFn make_score_fn(Strategy strategy) {
  switch (strategy) {
    case Strategy::kPbs: return score_pbs;
    case Strategy::kRewardGreedy: return score_reward_greedy;
    case Strategy::kLikelihood: return score_likelihood;
  }
  throw std::logic_error("bad strategy");
}

PruneFn make_prune_fn(Strategy strategy, const DecoderConfig& config) {
  if (strategy == Strategy::kPbs)
    return [](std::vector<BeamCandidate> c, int b, const std::vector<double>& w,
              std::mt19937_64& rng) { return prune_pbs(std::move(c), b, w, rng); };
  const double gamma = config.gamma;
  return [gamma](std::vector<BeamCandidate> c, int b, const std::vector<double>& w,
                 std::mt19937_64&) { return prune_topb(std::move(c), b, w, gamma); };
}

std::vector<BeamCandidate> beam_search(const SequenceModel& model, std::span<const int> history,
                                       std::span<const int> start_state,
                                       const DecoderConfig& config, const ScoreFn& score_fn,
                                       const PruneFn& prune_fn, const StepObserver& observer) {
  config.validate();
  const DiscretizerSpec& spec = model.discretizer();
  if (static_cast<int>(start_state.size()) != spec.state_dim())
    throw std::invalid_argument("beam_search: start state has wrong dimension");

  BeamCandidate root;
  root.trajectory.origin_state.assign(start_state.begin(), start_state.end());
  std::vector<BeamCandidate> beam{std::move(root)};

  for (int t = 1; t <= config.horizon; ++t) {
    std::vector<BeamCandidate> candidates;
    for (size_t i = 0; i < beam.size(); ++i) {
      const BeamCandidate& parent = beam[i];
      const std::vector<int> parent_tokens = parent.trajectory.flat_tokens();
      std::vector<int> context(history.begin(), history.end());
      context.insert(context.end(), parent_tokens.begin(), parent_tokens.end());

      std::vector<TokenizedTransition> seen;  // per-parent dedup by token equality
      const int samples = parent.multiplicity * config.expansion_factor;
      for (int j = 0; j < samples; ++j) {
        const uint64_t stream = derive_stream(config.seed, t, i, j);
        std::mt19937_64 rng(stream);
        SampledTransition sampled;
        try {
          sampled = sample_transition(model, context, config.temperature, rng,
                                      t == 1 ? start_state : std::span<const int>{});
        } catch (const std::exception& e) {
          throw std::runtime_error("beam_search: model failure at step " + std::to_string(t) +
                                   ": " + e.what());
        }
        if (std::find(seen.begin(), seen.end(), sampled.transition) != seen.end()) continue;
        seen.push_back(sampled.transition);

        BeamCandidate c;
        c.trajectory = parent.trajectory;
        c.trajectory.transitions.push_back(sampled.transition);
        if (t == 1) c.trajectory.origin_state = sampled.transition.state_tokens;
        c.ledger = parent.ledger;
        c.ledger.push_step(dist_moments(sampled.reward_dist), dist_moments(sampled.rtg_dist));
        c.cumulative_log_prob = parent.cumulative_log_prob + sampled.log_prob;
        c.parent_index = static_cast<int>(i);
        c.rng_stream_id = stream;
        candidates.push_back(std::move(c));
      }
    }

    const std::vector<double> scores = score_fn(candidates, model, config);
    if (scores.size() != candidates.size())
      throw std::logic_error("beam_search: score function returned wrong size");
    std::mt19937_64 prune_rng(derive_stream(config.seed, t, 0x70727565ULL, 0));
    std::vector<BeamCandidate> kept =
        observer ? prune_fn(candidates, config.beam_width, scores, prune_rng)
                 : prune_fn(std::move(candidates), config.beam_width, scores, prune_rng);
    if (static_cast<int>(kept.size()) > config.beam_width)
      throw std::logic_error("beam_search: prune exceeded the beam width");
    if (kept.empty()) throw std::runtime_error("beam_search: empty beam after pruning");
    if (observer) observer(t, candidates, scores, kept);
    beam = std::move(kept);
  }

  std::stable_sort(beam.begin(), beam.end(),
                   [](const BeamCandidate& a, const BeamCandidate& b) { return a.weight > b.weight; });
  return beam;
}

PlanResult plan_action(const SequenceModel& model, std::span<const int> history,
                       std::span<const double> state, const DecoderConfig& config,
                       const StepObserver& observer) {
  const DiscretizerSpec& spec = model.discretizer();
  if (static_cast<int>(state.size()) != spec.state_dim())
    throw std::invalid_argument("plan_action: state dimension mismatch");
  std::vector<int> start_tokens;
  for (int d = 0; d < spec.state_dim(); ++d)
    start_tokens.push_back(spec.state_channel(d).encode(state[d]));

  std::vector<BeamCandidate> beam =
      beam_search(model, history, start_tokens, config, make_score_fn(config.strategy),
                  make_prune_fn(config.strategy, config), observer);
  if (beam.empty()) throw std::runtime_error("plan_action: empty final beam");

  PlanResult result;
  result.chosen = beam.front();  // highest weight after the final prune
  const TokenizedTransition& first = result.chosen.trajectory.transitions.front();
  for (size_t d = 0; d < first.action_tokens.size(); ++d)
    result.action.push_back(spec.action_channel(d).decode(first.action_tokens[d]));
  return result;
}

}  // namespace pbs
