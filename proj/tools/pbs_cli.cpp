#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pbs/pipeline.hpp"

namespace {

// Flags write straight into the config, so parse order gives the
// precedence defaults < preset < config file < command-line flags: the
// config is resolved from --preset/--config in a first pass, then the full
// command line is parsed on top of it.
void add_common_options(CLI::App* cmd, pbs::ExperimentConfig& cfg, std::string& config_file,
                        std::string& preset) {
  cmd->add_option("--config", config_file, "JSON experiment config file");
  cmd->add_option("--preset", preset, "parameter preset: paper-default or risk-tolerant");
  cmd->add_option("--env", cfg.env, "builtin env name or MDP spec path");
  cmd->add_option("--out-dir", cfg.out_dir, "artifact directory")->envname("PBS_OUT_DIR");
  cmd->add_option("--episodes", cfg.episodes, "behavior episodes to generate");
  cmd->add_option("--data-seed", cfg.data_seed, "dataset generation seed");
  cmd->add_option("--bins", cfg.bins, "discretizer bins per channel");
  cmd->add_option("--gamma", cfg.gamma, "discount factor");
  cmd->add_option("--window", cfg.context_window,
                  "model context window in tokens (0 = one transition)");
  cmd->add_option("--lambda", cfg.lambda, "count-model smoothing");
  cmd->add_option("--beam-width", cfg.decoder.beam_width, "beam width b");
  cmd->add_option("--horizon", cfg.decoder.horizon, "planning horizon");
  cmd->add_option("--expansion", cfg.decoder.expansion_factor, "samples per beam entry");
  cmd->add_option("--delta", cfg.decoder.delta, "risk aversion");
  cmd->add_option("--alpha", cfg.decoder.alpha, "diversity regularization strength");
  cmd->add_option(
      "--reg-sign",
      [&cfg](const std::vector<std::string>& v) {
        if (v[0] == "spread")
          cfg.decoder.reg_sign = pbs::RegSign::kSpread;
        else if (v[0] == "concentrate")
          cfg.decoder.reg_sign = pbs::RegSign::kConcentrate;
        else
          return false;
        return true;
      },
      "regularization sign: spread or concentrate");
  cmd->add_option("--temperature", cfg.decoder.temperature, "sampling temperature");
  cmd->add_option(
      "--strategy",
      [&cfg](const std::vector<std::string>& v) {
        cfg.decoder.strategy = pbs::strategy_from_string(v[0]);
        return true;
      },
      "decoder strategy: pbs, reward_greedy or likelihood");
  cmd->add_option("--strategies", cfg.strategies, "strategies evaluated by `eval`");
  cmd->add_option("--eval-episodes", cfg.eval_episodes,
                  "closed-loop evaluation episodes per strategy");
  cmd->add_option("--eval-seed", cfg.eval_seed, "base evaluation seed");
}

int run_command(const std::string& name, std::vector<std::string> args) {
  // First pass: pick up --config/--preset only.
  std::string config_file, preset;
  {
    pbs::ExperimentConfig scratch;
    CLI::App pre{""};
    pre.allow_extras();
    add_common_options(&pre, scratch, config_file, preset);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    pre.parse(reversed);
  }

  pbs::ExperimentConfig cfg;
  if (!config_file.empty()) cfg = pbs::ExperimentConfig::from_json_file(config_file);
  if (!preset.empty()) cfg.apply_preset(preset);

  // Second pass: flags override the resolved config.
  CLI::App cmd{""};
  std::string cf2, pr2;
  add_common_options(&cmd, cfg, cf2, pr2);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  cmd.parse(reversed);

  if (name == "gen-data")
    pbs::cmd_gen_data(cfg, std::cout);
  else if (name == "train")
    pbs::cmd_train(cfg, std::cout);
  else if (name == "decode")
    pbs::cmd_decode(cfg, std::cout);
  else
    pbs::cmd_eval(cfg, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Portfolio beam search toolkit"};
  app.require_subcommand(1);

  CLI::App* gen =
      app.add_subcommand("gen-data", "generate a behavior dataset and fit the discretizer");
  CLI::App* train = app.add_subcommand("train", "train the sequence model on a dataset");
  CLI::App* decode =
      app.add_subcommand("decode", "run one decode from the start state and dump a trace");
  CLI::App* eval = app.add_subcommand("eval", "closed-loop evaluation of the configured strategies");
  CLI::App* report = app.add_subcommand("report", "aggregate results files into a report");
  for (CLI::App* cmd : {gen, train, decode, eval}) cmd->allow_extras();

  std::vector<std::string> results_files;
  std::string report_path = "report.csv";
  std::string plot_path = "plot_data.csv";
  report->add_option("results", results_files, "results.csv files to aggregate")->required();
  report->add_option("--report", report_path, "output report path");
  report->add_option("--plot-data", plot_path, "output plot-data path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // bad usage is a validation error
  }

  try {
    if (report->parsed()) {
      pbs::cmd_report(results_files, report_path, plot_path, std::cout);
      return 0;
    }
    CLI::App* active = gen->parsed()   ? gen
                       : train->parsed() ? train
                       : decode->parsed() ? decode
                                          : eval;
    const std::string name = active->get_name();
    std::vector<std::string> args;
    for (int i = 2; i < argc; ++i) args.emplace_back(argv[i]);
    return run_command(name, std::move(args));
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.get_name() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
