#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pbs/moments.hpp"
#include "pbs/portfolio.hpp"

namespace pbs {

enum class Strategy { kPbs, kRewardGreedy, kLikelihood };

Strategy strategy_from_string(const std::string& name);
std::string strategy_to_string(Strategy s);

struct DecoderConfig {
  int beam_width = 6;
  int horizon = 6;
  int expansion_factor = 2;  // samples per beam entry
  double gamma = 0.99;
  double delta = 1.0;
  double alpha = 0.1;
  RegSign reg_sign = RegSign::kSpread;
  double temperature = 1.0;
  Strategy strategy = Strategy::kPbs;
  uint64_t seed = 0;

  void validate() const;
};

struct BeamCandidate {
  Trajectory trajectory;
  MomentLedger ledger;
  double cumulative_log_prob = 0.0;
  int parent_index = -1;
  uint64_t rng_stream_id = 0;
  // Times this candidate was drawn by sampling-with-repetition pruning;
  // scales its expansion budget at the next step.
  int multiplicity = 1;
  double weight = 0.0;  // score assigned at the last prune
};

using ScoreFn = std::function<std::vector<double>(const std::vector<BeamCandidate>&,
                                                  const SequenceModel&, const DecoderConfig&)>;
using PruneFn = std::function<std::vector<BeamCandidate>(std::vector<BeamCandidate>, int,
                                                         const std::vector<double>&,
                                                         std::mt19937_64&)>;

// Per-step trace callback: candidates with their scores, then the kept beam.
using StepObserver =
    std::function<void(int step, const std::vector<BeamCandidate>& candidates,
                       const std::vector<double>& scores, const std::vector<BeamCandidate>& kept)>;

// Counter-derived rng substream, so parallel and serial expansion orders
// agree.
uint64_t derive_stream(uint64_t root_seed, uint64_t a, uint64_t b, uint64_t c);

std::vector<double> score_reward_greedy(const std::vector<BeamCandidate>& candidates,
                                        const SequenceModel& model, const DecoderConfig& config);
std::vector<double> score_likelihood(const std::vector<BeamCandidate>& candidates,
                                     const SequenceModel& model, const DecoderConfig& config);
// Weights from the mean-variance portfolio over all candidates.
std::vector<double> score_pbs(const std::vector<BeamCandidate>& candidates,
                              const SequenceModel& model, const DecoderConfig& config);

// Deterministic top-b; ties broken by trajectory mean, then lower index.
std::vector<BeamCandidate> prune_topb(std::vector<BeamCandidate> candidates, int b,
                                      const std::vector<double>& scores, double gamma);
// b categorical draws with repetition; the retained beam is the set of
// distinct sampled candidates with their draw multiplicities.
std::vector<BeamCandidate> prune_pbs(std::vector<BeamCandidate> candidates, int b,
                                     const std::vector<double>& weights, std::mt19937_64& rng);

ScoreFn make_score_fn(Strategy strategy);
PruneFn make_prune_fn(Strategy strategy, const DecoderConfig& config);

// Expand each beam entry, score all candidates, prune to at most b;
// returns the final beam sorted by score descending.
// `history` is token context preceding the planned trajectory and
// `start_state` the observed state tokens forced into the first
// transition.
std::vector<BeamCandidate> beam_search(const SequenceModel& model,
                                       std::span<const int> history,
                                       std::span<const int> start_state,
                                       const DecoderConfig& config, const ScoreFn& score_fn,
                                       const PruneFn& prune_fn,
                                       const StepObserver& observer = nullptr);

struct PlanResult {
  std::vector<double> action;  // detokenized first action
  BeamCandidate chosen;
};

// Receding-horizon wrapper: tokenize the observed state, run beam_search
// with the configured strategy, return the top candidate's first action.
PlanResult plan_action(const SequenceModel& model, std::span<const int> history,
                       std::span<const double> state, const DecoderConfig& config,
                       const StepObserver& observer = nullptr);

}  // namespace pbs
