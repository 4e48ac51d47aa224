#pragma once

#include <string>
#include <vector>

#include "pbs/discretizer.hpp"
#include "pbs/trajectory.hpp"

namespace pbs {

struct Step {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  double rtg = 0.0;
};

using Episode = std::vector<Step>;

// Backward recursion R_t = r_t + gamma * R_{t+1}, R_{H+1} = 0.
void annotate_rtg(Episode& episode, double gamma);

// Ranges set to the observed per-channel [min, max]; episodes must carry
// rtg annotations already. Zero-width channels are widened by epsilon.
DiscretizerSpec fit_discretizer(const std::vector<Episode>& episodes, int bins_per_dim);

Trajectory tokenize_episode(const Episode& episode, const DiscretizerSpec& spec);
Episode detokenize(const Trajectory& trajectory, const DiscretizerSpec& spec);

// Line-delimited episode files: one JSON record per line with fields
// "states", "actions", "rewards".
void save_episodes(const std::vector<Episode>& episodes, const std::string& path);
std::vector<Episode> load_episodes(const std::string& path);

}  // namespace pbs
