#include "pbs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pbs {

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr const char* kResultsHeader = "type,strategy,seed,return,std,count,status";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

struct RunningStats {
  int n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  void add(double v) {
    ++n;
    sum += v;
    sum_sq += v * v;
  }
  double mean() const { return n == 0 ? 0.0 : sum / n; }
  double stddev() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, (sum_sq - n * m * m) / (n - 1)));
  }
};

}  // namespace

void ExperimentConfig::apply_preset(const std::string& name) {
  if (name == "paper-default") {
    decoder.delta = 1.0;
    decoder.alpha = 0.1;
    decoder.gamma = 0.99;
    gamma = 0.99;
  } else if (name == "risk-tolerant") {
    decoder.delta = 0.01;
    decoder.alpha = 0.01;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  ExperimentConfig c;
  if (j.contains("preset")) c.apply_preset(j["preset"].get<std::string>());
  c.env = j.value("env", c.env);
  c.episodes = j.value("episodes", c.episodes);
  c.data_seed = j.value("data_seed", c.data_seed);
  c.bins = j.value("bins", c.bins);
  c.gamma = j.value("gamma", c.gamma);
  c.context_window = j.value("context_window", c.context_window);
  c.lambda = j.value("lambda", c.lambda);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  c.eval_seed = j.value("eval_seed", c.eval_seed);
  if (j.contains("strategies")) c.strategies = j["strategies"].get<std::vector<std::string>>();
  if (j.contains("decoder")) {
    const auto& d = j["decoder"];
    c.decoder.beam_width = d.value("beam_width", c.decoder.beam_width);
    c.decoder.horizon = d.value("horizon", c.decoder.horizon);
    c.decoder.expansion_factor = d.value("expansion_factor", c.decoder.expansion_factor);
    c.decoder.gamma = d.value("gamma", c.gamma);
    c.decoder.delta = d.value("delta", c.decoder.delta);
    c.decoder.alpha = d.value("alpha", c.decoder.alpha);
    c.decoder.temperature = d.value("temperature", c.decoder.temperature);
    c.decoder.seed = d.value("seed", c.decoder.seed);
    if (d.contains("reg_sign"))
      c.decoder.reg_sign = d["reg_sign"].get<std::string>() == "concentrate"
                               ? RegSign::kConcentrate
                               : RegSign::kSpread;
    if (d.contains("strategy"))
      c.decoder.strategy = strategy_from_string(d["strategy"].get<std::string>());
  }
  if (j.contains("chain")) {
    const auto& r = j["chain"];
    c.chain.r_safe = r.value("r_safe", c.chain.r_safe);
    c.chain.r_risky = r.value("r_risky", c.chain.r_risky);
    c.chain.r_bad = r.value("r_bad", c.chain.r_bad);
    c.chain.crash_reward = r.value("crash_reward", c.chain.crash_reward);
    c.chain.p_crash = r.value("p_crash", c.chain.p_crash);
    c.chain.coverage_risky = r.value("coverage_risky", c.chain.coverage_risky);
    c.chain.coverage_bad = r.value("coverage_bad", c.chain.coverage_bad);
    c.chain.corridor_len = r.value("corridor_len", c.chain.corridor_len);
  }
  return c;
}

ResolvedEnv resolve_env(const ExperimentConfig& config) {
  if (config.env == "risky-chain") {
    RiskyChain chain = make_risky_chain(config.chain);
    return {std::move(chain.mdp), std::move(chain.behavior)};
  }
  if (!std::filesystem::exists(config.env))
    throw std::runtime_error("env spec path does not exist: " + config.env);
  TabularMdp mdp = TabularMdp::load(config.env);
  BehaviorPolicy behavior = make_uniform_policy(mdp);
  return {std::move(mdp), std::move(behavior)};
}

Planner make_model_planner(const SequenceModel& model, const TabularMdp& mdp,
                           DecoderConfig decoder, uint64_t episode_seed) {
  struct PlannerState {
    std::vector<int> context;
    std::vector<int> planned_rtg_tokens;
    size_t steps_recorded = 0;
  };
  auto state_ptr = std::make_shared<PlannerState>();

  return [&model, &mdp, decoder, episode_seed, state_ptr](
             const Episode& history, const std::vector<double>& state) -> std::vector<double> {
    const DiscretizerSpec& spec = model.discretizer();
    PlannerState& ps = *state_ptr;

    // Append any newly executed transitions to the token context. The rtg
    // token comes from the plan that produced the step.
    for (size_t i = ps.steps_recorded; i < history.size(); ++i) {
      const Step& s = history[i];
      for (int d = 0; d < spec.state_dim(); ++d)
        ps.context.push_back(spec.state_channel(d).encode(s.state[d]));
      for (int d = 0; d < spec.action_dim(); ++d)
        ps.context.push_back(spec.action_channel(d).encode(s.action[d]));
      ps.context.push_back(spec.reward_channel().encode(s.reward));
      ps.context.push_back(i < ps.planned_rtg_tokens.size()
                               ? ps.planned_rtg_tokens[i]
                               : spec.rtg_channel().encode(s.reward));
      ps.steps_recorded = i + 1;
    }

    DecoderConfig cfg = decoder;
    const int remaining = mdp.horizon - static_cast<int>(history.size());
    cfg.horizon = std::max(1, std::min(cfg.horizon, remaining));
    cfg.seed = derive_stream(episode_seed, 0x706c616eULL, history.size(), 0);

    const PlanResult plan = plan_action(model, ps.context, state, cfg);
    if (ps.planned_rtg_tokens.size() <= history.size())
      ps.planned_rtg_tokens.resize(history.size() + 1);
    ps.planned_rtg_tokens[history.size()] =
        plan.chosen.trajectory.transitions.front().rtg_token;
    return plan.action;
  };
}

double estimate_corridor_mean(const SequenceModel& model, const TabularMdp& mdp, int first_action,
                              int horizon, double gamma) {
  const DiscretizerSpec& spec = model.discretizer();
  const int k = spec.state_dim();
  const int m = spec.action_dim();
  int start = 0;
  for (int s = 1; s < mdp.n_states; ++s)
    if (mdp.rho0[s] > mdp.rho0[start]) start = s;

  std::vector<int> ctx;
  MomentLedger ledger;
  for (int t = 1; t <= horizon; ++t) {
    for (int j = 0; j < k + m + 2; ++j) {
      const CategoricalOverBins dist = model.next_token_dist(ctx, j, 1.0);
      int token;
      if (t == 1 && j < k) {
        token = spec.state_channel(j).encode(mdp.embed_state(start)[j]);
      } else if (t == 1 && j == k) {
        token = spec.action_channel(0).encode(mdp.action_embed.at(first_action));
      } else {
        token = dist.modal();
      }
      if (j == k + m) {
        Moments reward_m = dist_moments(dist);
        ledger.reward.push_back(reward_m);
      } else if (j == k + m + 1) {
        ledger.rtg = dist_moments(dist);
      }
      ctx.push_back(token);
    }
  }
  return trajectory_mean(ledger, gamma);
}

void cmd_gen_data(const ExperimentConfig& config, std::ostream& log) {
  if (config.episodes < 1) throw std::invalid_argument("gen-data: episodes must be >= 1");
  ResolvedEnv env = resolve_env(config);
  std::filesystem::create_directories(config.out_dir);

  std::vector<Episode> episodes =
      generate_dataset(env.mdp, env.behavior, config.episodes, config.data_seed);
  save_episodes(episodes, config.episodes_path());

  for (auto& ep : episodes) annotate_rtg(ep, config.gamma);
  DiscretizerSpec spec = fit_discretizer(episodes, config.bins);
  spec.save(config.discretizer_path());

  // coverage summary: first-action histogram
  std::map<int, int> first_actions;
  for (const auto& ep : episodes)
    if (!ep.empty()) ++first_actions[env.mdp.nearest_action(ep.front().action[0])];
  log << "episodes=" << episodes.size() << " horizon=" << env.mdp.horizon << "\n";
  for (const auto& [a, n] : first_actions)
    log << "first_action=" << a << " episodes=" << n << " fraction="
        << fmt_g(static_cast<double>(n) / episodes.size()) << "\n";
  log << "wrote " << config.episodes_path() << "\n";
  log << "wrote " << config.discretizer_path() << "\n";
}

void cmd_train(const ExperimentConfig& config, std::ostream& log) {
  std::vector<Episode> episodes = load_episodes(config.episodes_path());
  DiscretizerSpec spec = DiscretizerSpec::load(config.discretizer_path());
  for (auto& ep : episodes) annotate_rtg(ep, config.gamma);

  std::vector<Trajectory> trajectories;
  trajectories.reserve(episodes.size());
  for (const auto& ep : episodes) trajectories.push_back(tokenize_episode(ep, spec));

  CountModel model = train_count_model(trajectories, spec, config.context_window, config.lambda);
  model.save(config.model_path());

  // held-out diagnostic: refit on the first 90%, score the rest
  const size_t cut = std::max<size_t>(1, trajectories.size() * 9 / 10);
  if (cut < trajectories.size()) {
    std::vector<Trajectory> train_part(trajectories.begin(), trajectories.begin() + cut);
    std::vector<Trajectory> heldout(trajectories.begin() + cut, trajectories.end());
    CountModel holdout_model =
        train_count_model(train_part, spec, config.context_window, config.lambda);
    log << "heldout_log_likelihood=" << fmt_g(holdout_model.log_likelihood(heldout)) << "\n";
  }
  log << "train_log_likelihood=" << fmt_g(model.log_likelihood(trajectories)) << "\n";
  log << "wrote " << config.model_path() << "\n";
}

void cmd_decode(const ExperimentConfig& config, std::ostream& log) {
  CountModel model = CountModel::load(config.model_path());
  ResolvedEnv env = resolve_env(config);
  int start = 0;
  for (int s = 1; s < env.mdp.n_states; ++s)
    if (env.mdp.rho0[s] > env.mdp.rho0[start]) start = s;

  std::ofstream trace(config.trace_path());
  if (!trace) throw std::runtime_error("cannot write trace file: " + config.trace_path());
  StepObserver observer = [&](int step, const std::vector<BeamCandidate>& candidates,
                              const std::vector<double>& scores,
                              const std::vector<BeamCandidate>& kept) {
    nlohmann::json j;
    j["step"] = step;
    for (size_t i = 0; i < candidates.size(); ++i) {
      nlohmann::json c;
      c["tokens"] = candidates[i].trajectory.flat_tokens();
      c["mu"] = trajectory_mean(candidates[i].ledger, config.decoder.gamma);
      c["sigma"] = std::sqrt(trajectory_variance(candidates[i].ledger, config.decoder.gamma));
      c["score"] = scores[i];
      j["candidates"].push_back(std::move(c));
    }
    for (const auto& keep : kept) {
      j["kept"].push_back(
          {{"tokens", keep.trajectory.flat_tokens()}, {"multiplicity", keep.multiplicity}});
    }
    trace << j.dump() << "\n";
  };

  DecoderConfig cfg = config.decoder;
  cfg.horizon = std::min(cfg.horizon, env.mdp.horizon);
  const PlanResult plan =
      plan_action(model, {}, env.mdp.embed_state(start), cfg, observer);
  log << "strategy=" << strategy_to_string(cfg.strategy) << "\n";
  log << "action=";
  for (size_t i = 0; i < plan.action.size(); ++i)
    log << (i ? " " : "") << fmt_g(plan.action[i]);
  log << "\n";
  log << "nearest_action_id=" << env.mdp.nearest_action(plan.action[0]) << "\n";
  log << "wrote " << config.trace_path() << "\n";
}

void cmd_eval(const ExperimentConfig& config, std::ostream& log) {
  CountModel model = CountModel::load(config.model_path());
  ResolvedEnv env = resolve_env(config);
  std::filesystem::create_directories(config.out_dir);

  std::ofstream out(config.results_path());
  if (!out) throw std::runtime_error("cannot write results file: " + config.results_path());
  out << kResultsHeader << "\n";

  for (const std::string& strategy_name : config.strategies) {
    DecoderConfig cfg = config.decoder;
    cfg.strategy = strategy_from_string(strategy_name);

    RunningStats stats;
    int failed = 0;
    std::vector<std::string> rows;
    for (int i = 0; i < config.eval_episodes; ++i) {
      const uint64_t seed = config.eval_seed + static_cast<uint64_t>(i);
      Planner planner = make_model_planner(model, env.mdp, cfg, seed);
      const RolloutResult res = rollout(env.mdp, planner, 1, seed).front();
      std::string row = "episode," + strategy_name + "," + std::to_string(seed) + ",";
      if (res.failed) {
        ++failed;
        row += ",,," + std::string("failed");
      } else {
        stats.add(res.total_return);
        row += fmt_g(res.total_return) + ",,,ok";
      }
      rows.push_back(std::move(row));
    }
    for (const auto& r : rows) out << r << "\n";
    out << "summary," << strategy_name << ",," << fmt_g(stats.mean()) << ","
        << fmt_g(stats.stddev()) << "," << stats.n << ",excluded=" << failed << "\n";
    log << strategy_name << ": mean=" << fmt_g(stats.mean()) << " std=" << fmt_g(stats.stddev())
        << " n=" << stats.n << " failed=" << failed << "\n";
  }
  log << "wrote " << config.results_path() << "\n";
}

void cmd_report(const std::vector<std::string>& results_files, const std::string& report_path,
                const std::string& plot_path, std::ostream& log) {
  if (results_files.empty()) throw std::invalid_argument("report: no results files given");

  std::vector<std::string> order;
  std::map<std::string, RunningStats> stats;
  std::map<std::string, int> failed;
  for (const std::string& path : results_files) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read results file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kResultsHeader)
      throw std::runtime_error("results file " + path + ": header mismatch, expected '" +
                               kResultsHeader + "'");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const std::vector<std::string> f = split_csv(line);
      if (f.size() != 7)
        throw std::runtime_error("results file " + path + ": bad column count in row '" + line +
                                 "'");
      if (f[0] != "episode") continue;
      const std::string& strategy = f[1];
      if (!stats.count(strategy)) order.push_back(strategy);
      if (f[6] == "ok") {
        stats[strategy].add(std::stod(f[3]));
      } else {
        stats[strategy];
        ++failed[strategy];
      }
    }
  }

  std::ofstream report(report_path);
  if (!report) throw std::runtime_error("cannot write report file: " + report_path);
  report << "strategy,mean,std,count,failed\n";
  std::ofstream plot(plot_path);
  if (!plot) throw std::runtime_error("cannot write plot-data file: " + plot_path);
  plot << "strategy,mean,std\n";
  for (const std::string& strategy : order) {
    const RunningStats& s = stats[strategy];
    report << strategy << "," << fmt_g(s.mean()) << "," << fmt_g(s.stddev()) << "," << s.n << ","
           << failed[strategy] << "\n";
    plot << strategy << "," << fmt_g(s.mean()) << "," << fmt_g(s.stddev()) << "\n";
    log << strategy << ": mean=" << fmt_g(s.mean()) << " std=" << fmt_g(s.stddev())
        << " n=" << s.n << "\n";
  }
  log << "wrote " << report_path << "\n";
  log << "wrote " << plot_path << "\n";
}

std::vector<StrategySummary> read_results_summaries(const std::string& results_path) {
  std::ifstream in(results_path);
  if (!in) throw std::runtime_error("cannot read results file: " + results_path);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader)
    throw std::runtime_error("results file " + results_path + ": header mismatch");
  std::vector<StrategySummary> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 7 || f[0] != "summary") continue;
    StrategySummary s;
    s.strategy = f[1];
    s.mean = std::stod(f[3]);
    s.stddev = std::stod(f[4]);
    s.count = std::stoi(f[5]);
    if (f[6].rfind("excluded=", 0) == 0) s.failed = std::stoi(f[6].substr(9));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pbs
