#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "pbs/discretizer.hpp"
#include "pbs/trajectory.hpp"

namespace pbs {

// Next-token categorical distribution over the bins of one channel.
struct CategoricalOverBins {
  std::vector<double> probs;
  std::vector<double> bin_values;

  int size() const { return static_cast<int>(probs.size()); }
  void validate() const;
  int modal() const;
  double log_prob(int token) const;
  int sample(std::mt19937_64& rng) const;
};

// The P_theta boundary: an autoregressive next-token distribution over
// flattened trajectory tokens. Implementations must be deterministic and
// safe for concurrent reads.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual CategoricalOverBins next_token_dist(std::span<const int> context, int channel,
                                              double temperature) const = 0;
  virtual int context_window() const = 0;
  virtual const DiscretizerSpec& discretizer() const = 0;
};

struct SampledTransition {
  TokenizedTransition transition;
  CategoricalOverBins reward_dist;
  CategoricalOverBins rtg_dist;
  double log_prob = 0.0;
};

// Samples K+M+2 tokens autoregressively in channel order. The reward and
// rtg distributions seen during sampling are returned so evaluation never
// re-queries the model. `forced_state` pins the state tokens when present
// (the observed start state of the first transition).
SampledTransition sample_transition(const SequenceModel& model, std::span<const int> context,
                                    double temperature, std::mt19937_64& rng,
                                    std::span<const int> forced_state = {});

}  // namespace pbs
