#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pbs/model.hpp"

namespace pbs {

// Smoothed n-gram conditional distribution over flattened trajectory
// tokens; desk-scale stand-in for a trained Transformer. Distributions are
// (count + lambda) / (total + lambda * V) keyed by the last W context
// tokens. Read-only after training.
class CountModel : public SequenceModel {
 public:
  CategoricalOverBins next_token_dist(std::span<const int> context, int channel,
                                      double temperature) const override;
  int context_window() const override { return window_; }
  const DiscretizerSpec& discretizer() const override { return spec_; }

  double smoothing() const { return lambda_; }

  // Smoothed probability of `token` in `channel` given a context, before
  // temperature scaling.
  double token_prob(std::span<const int> context, int channel, int token) const;

  // Mean per-token log-likelihood of a set of trajectories.
  double log_likelihood(const std::vector<Trajectory>& trajectories) const;

  std::string to_json_string() const;
  static CountModel from_json_string(const std::string& text);
  void save(const std::string& path) const;
  static CountModel load(const std::string& path);

  friend CountModel train_count_model(const std::vector<Trajectory>& dataset,
                                      const DiscretizerSpec& spec, int window, double lambda);

 private:
  const std::vector<uint32_t>* lookup(std::span<const int> context, int channel) const;

  DiscretizerSpec spec_;
  int window_ = 0;
  double lambda_ = 1.0;
  // One count table per channel, keyed by the serialized context.
  std::vector<std::map<std::string, std::vector<uint32_t>>> tables_;
};

// `window` is the context length in tokens; 0 selects the default of one
// full transition (K+M+2 tokens).
CountModel train_count_model(const std::vector<Trajectory>& dataset, const DiscretizerSpec& spec,
                             int window = 0, double lambda = 1.0);

}  // namespace pbs
