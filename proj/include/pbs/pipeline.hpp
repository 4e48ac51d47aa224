#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pbs/count_model.hpp"
#include "pbs/decode.hpp"
#include "pbs/env.hpp"

namespace pbs {

// End-to-end harness configuration: data generation, model training,
// decoding and closed-loop evaluation.
struct ExperimentConfig {
  // A wider expansion than the decoder's bare default, so the rarely
  // demonstrated risky corridor reliably enters the candidate set.
  ExperimentConfig() { decoder.expansion_factor = 24; }

  std::string env = "risky-chain";  // builtin name or path to an MDP spec file
  RiskyChainSpec chain;

  int episodes = 500;
  uint64_t data_seed = 7;
  int bins = 64;
  double gamma = 0.99;

  int context_window = 0;  // tokens; 0 = one full transition
  double lambda = 0.005;

  DecoderConfig decoder;

  std::vector<std::string> strategies = {"pbs", "reward_greedy"};
  int eval_episodes = 30;
  uint64_t eval_seed = 1000;

  std::string out_dir = "out";

  std::string episodes_path() const { return out_dir + "/episodes.jsonl"; }
  std::string discretizer_path() const { return out_dir + "/discretizer.json"; }
  std::string model_path() const { return out_dir + "/model.json"; }
  std::string results_path() const { return out_dir + "/results.csv"; }
  std::string trace_path() const { return out_dir + "/trace.jsonl"; }

  // "paper-default" (delta=1, alpha=0.1, gamma=0.99) or "risk-tolerant"
  // (delta=alpha=0.01).
  void apply_preset(const std::string& name);

  static ExperimentConfig from_json_file(const std::string& path);
};

struct ResolvedEnv {
  TabularMdp mdp;
  BehaviorPolicy behavior;
};

ResolvedEnv resolve_env(const ExperimentConfig& config);

// Planner closure for one evaluation episode; keeps its own token context
// so replanning conditions on the executed history.
Planner make_model_planner(const SequenceModel& model, const TabularMdp& mdp,
                           DecoderConfig decoder, uint64_t episode_seed);

// Expected return of committing to `first_action` under the model's modal
// rollout; used to compare model estimates against the DP oracle.
double estimate_corridor_mean(const SequenceModel& model, const TabularMdp& mdp, int first_action,
                              int horizon, double gamma);

void cmd_gen_data(const ExperimentConfig& config, std::ostream& log);
void cmd_train(const ExperimentConfig& config, std::ostream& log);
void cmd_decode(const ExperimentConfig& config, std::ostream& log);
void cmd_eval(const ExperimentConfig& config, std::ostream& log);
void cmd_report(const std::vector<std::string>& results_files, const std::string& report_path,
                const std::string& plot_path, std::ostream& log);

// Per-strategy aggregate parsed back out of a results/report file.
struct StrategySummary {
  std::string strategy;
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
  int failed = 0;
};

std::vector<StrategySummary> read_results_summaries(const std::string& results_path);

}  // namespace pbs
