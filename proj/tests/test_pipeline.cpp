#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pbs/pipeline.hpp"

using namespace pbs;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("pbs_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out);
  out << text;
}

// Small, fast experiment over the builtin chain.
ExperimentConfig small_config(const std::string& tag) {
  ExperimentConfig c;
  c.out_dir = fresh_dir(tag);
  c.episodes = 60;
  c.bins = 16;
  c.decoder.beam_width = 2;
  c.decoder.expansion_factor = 4;
  c.eval_episodes = 3;
  return c;
}

std::ostringstream null_log;

}  // namespace

TEST_CASE("presets set the advertised risk knobs") {
  ExperimentConfig c;
  c.decoder.delta = 9.0;
  c.apply_preset("paper-default");
  CHECK(c.decoder.delta == 1.0);
  CHECK(c.decoder.alpha == 0.1);
  CHECK(c.decoder.gamma == 0.99);
  CHECK(c.gamma == 0.99);
  c.apply_preset("risk-tolerant");
  CHECK(c.decoder.delta == 0.01);
  CHECK(c.decoder.alpha == 0.01);
  CHECK_THROWS_AS(c.apply_preset("bogus"), std::invalid_argument);
}

TEST_CASE("config file: fields, nested sections and preset precedence") {
  const std::string dir = fresh_dir("cfg");
  const std::string path = dir + "/config.json";
  spit(path, R"({
    "preset": "paper-default",
    "episodes": 123,
    "bins": 32,
    "lambda": 0.25,
    "out_dir": "elsewhere",
    "strategies": ["likelihood"],
    "decoder": {"beam_width": 3, "delta": 0.5, "strategy": "reward_greedy",
                "reg_sign": "concentrate"},
    "chain": {"p_crash": 0.2, "corridor_len": 3}
  })");
  const ExperimentConfig c = ExperimentConfig::from_json_file(path);
  CHECK(c.episodes == 123);
  CHECK(c.bins == 32);
  CHECK(c.lambda == 0.25);
  CHECK(c.out_dir == "elsewhere");
  CHECK(c.strategies == std::vector<std::string>{"likelihood"});
  CHECK(c.decoder.beam_width == 3);
  CHECK(c.decoder.delta == 0.5);  // explicit field wins over the preset
  CHECK(c.decoder.alpha == 0.1);  // preset value survives where not overridden
  CHECK(c.decoder.strategy == Strategy::kRewardGreedy);
  CHECK(c.decoder.reg_sign == RegSign::kConcentrate);
  CHECK(c.chain.p_crash == 0.2);
  CHECK(c.chain.corridor_len == 3);
  CHECK_THROWS(ExperimentConfig::from_json_file(dir + "/missing.json"));
  spit(path, R"({"preset": "nope"})");
  CHECK_THROWS(ExperimentConfig::from_json_file(path));
}

TEST_CASE("environment resolution: builtin, file-backed and missing path") {
  ExperimentConfig c;
  const ResolvedEnv builtin = resolve_env(c);
  CHECK(builtin.mdp.n_states == 13);

  const std::string dir = fresh_dir("env");
  const std::string mdp_path = dir + "/mdp.json";
  builtin.mdp.save(mdp_path);
  c.env = mdp_path;
  const ResolvedEnv loaded = resolve_env(c);
  CHECK(loaded.mdp.to_json_string() == builtin.mdp.to_json_string());
  // file-backed environments default to the uniform behavior policy
  CHECK(loaded.behavior.probs[0][0] == doctest::Approx(1.0 / 3));

  c.env = dir + "/nope.json";
  try {
    resolve_env(c);
    FAIL("expected an error for the missing path");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("nope.json") != std::string::npos);
  }
}

TEST_CASE("gen-data: artifacts, determinism and validation") {
  ExperimentConfig c = small_config("gen");
  CHECK_NOTHROW(cmd_gen_data(c, null_log));
  CHECK(fs::exists(c.episodes_path()));
  CHECK(fs::exists(c.discretizer_path()));
  const std::string episodes = slurp(c.episodes_path());
  const std::string disc = slurp(c.discretizer_path());

  cmd_gen_data(c, null_log);  // rerun in place
  CHECK(slurp(c.episodes_path()) == episodes);
  CHECK(slurp(c.discretizer_path()) == disc);

  c.episodes = 0;
  CHECK_THROWS_AS(cmd_gen_data(c, null_log), std::invalid_argument);
}

TEST_CASE("train: deterministic model that beats the uniform baseline") {
  ExperimentConfig c = small_config("train");
  cmd_gen_data(c, null_log);
  cmd_train(c, null_log);
  const std::string model_text = slurp(c.model_path());
  cmd_train(c, null_log);
  CHECK(slurp(c.model_path()) == model_text);

  CountModel model = CountModel::load(c.model_path());
  std::vector<Episode> episodes = load_episodes(c.episodes_path());
  for (auto& ep : episodes) annotate_rtg(ep, c.gamma);
  std::vector<Trajectory> trajs;
  for (const auto& ep : episodes) trajs.push_back(tokenize_episode(ep, model.discretizer()));
  CHECK(model.log_likelihood(trajs) > std::log(1.0 / c.bins));
}

TEST_CASE("decode: writes a per-step trace") {
  ExperimentConfig c = small_config("decode");
  cmd_gen_data(c, null_log);
  cmd_train(c, null_log);
  std::ostringstream log;
  cmd_decode(c, log);
  CHECK(fs::exists(c.trace_path()));
  std::ifstream trace(c.trace_path());
  int lines = 0;
  for (std::string line; std::getline(trace, line);) ++lines;
  CHECK(lines == c.decoder.horizon);
  CHECK(log.str().find("action=") != std::string::npos);
}

TEST_CASE("eval: row contract and degenerate single-seed spread") {
  ExperimentConfig c = small_config("eval");
  cmd_gen_data(c, null_log);
  cmd_train(c, null_log);
  cmd_eval(c, null_log);

  // 2 strategies x 3 seeds: 6 episode rows plus 2 summary rows
  std::ifstream in(c.results_path());
  std::string line;
  int episode_rows = 0, summary_rows = 0;
  std::getline(in, line);
  CHECK(line == "type,strategy,seed,return,std,count,status");
  while (std::getline(in, line)) {
    if (line.rfind("episode,", 0) == 0) ++episode_rows;
    if (line.rfind("summary,", 0) == 0) ++summary_rows;
  }
  CHECK(episode_rows == 6);
  CHECK(summary_rows == 2);

  const auto summaries = read_results_summaries(c.results_path());
  REQUIRE(summaries.size() == 2);
  CHECK(summaries[0].strategy == "pbs");
  CHECK(summaries[1].strategy == "reward_greedy");
  for (const auto& s : summaries) CHECK(s.count + s.failed == 3);

  c.eval_episodes = 1;
  cmd_eval(c, null_log);
  for (const auto& s : read_results_summaries(c.results_path()))
    CHECK(s.stddev == 0.0);
}

TEST_CASE("report: aggregates hand-computed values and doubles with a repeated file") {
  const std::string dir = fresh_dir("report");
  const std::string results = dir + "/results.csv";
  spit(results,
       "type,strategy,seed,return,std,count,status\n"
       "episode,pbs,1,2,,,ok\n"
       "episode,pbs,2,4,,,ok\n"
       "episode,pbs,3,,,,failed\n"
       "episode,greedy,1,6,,,ok\n"
       "summary,pbs,,3,1.4142135623730951,2,excluded=1\n");
  std::ostringstream log;
  cmd_report({results}, dir + "/report.csv", dir + "/plot.csv", log);
  const std::string report = slurp(dir + "/report.csv");
  CHECK(report.find("strategy,mean,std,count,failed\n") == 0);
  CHECK(report.find("pbs,3,1.4142135623730951,2,1\n") != std::string::npos);
  CHECK(report.find("greedy,6,0,1,0\n") != std::string::npos);
  CHECK(slurp(dir + "/plot.csv").find("pbs,3,1.4142135623730951\n") != std::string::npos);

  // the same file twice: counts double, the mean is unchanged
  cmd_report({results, results}, dir + "/report2.csv", dir + "/plot2.csv", log);
  CHECK(slurp(dir + "/report2.csv").find("pbs,3,") != std::string::npos);
  CHECK(slurp(dir + "/report2.csv").find(",4,2\n") != std::string::npos);
}

TEST_CASE("report: schema violations are rejected with the offending file named") {
  const std::string dir = fresh_dir("badreport");
  const std::string bad_header = dir + "/bad_header.csv";
  spit(bad_header, "strategy,mean\nx,1\n");
  try {
    cmd_report({bad_header}, dir + "/r.csv", dir + "/p.csv", null_log);
    FAIL("expected a header mismatch error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("bad_header.csv") != std::string::npos);
    CHECK(std::string(e.what()).find("header") != std::string::npos);
  }

  const std::string bad_row = dir + "/bad_row.csv";
  spit(bad_row,
       "type,strategy,seed,return,std,count,status\n"
       "episode,pbs,1,2\n");
  CHECK_THROWS(cmd_report({bad_row}, dir + "/r.csv", dir + "/p.csv", null_log));
  CHECK_THROWS(cmd_report({}, dir + "/r.csv", dir + "/p.csv", null_log));
}

TEST_CASE("full pipeline rerun is byte-identical") {
  ExperimentConfig a = small_config("repro_a");
  ExperimentConfig b = small_config("repro_b");
  for (ExperimentConfig* c : {&a, &b}) {
    cmd_gen_data(*c, null_log);
    cmd_train(*c, null_log);
    cmd_eval(*c, null_log);
  }
  CHECK(slurp(a.episodes_path()) == slurp(b.episodes_path()));
  CHECK(slurp(a.discretizer_path()) == slurp(b.discretizer_path()));
  CHECK(slurp(a.model_path()) == slurp(b.model_path()));
  CHECK(slurp(a.results_path()) == slurp(b.results_path()));
}

TEST_CASE("model planner: closed-loop rollouts are deterministic per seed") {
  ExperimentConfig c = small_config("planner");
  cmd_gen_data(c, null_log);
  cmd_train(c, null_log);
  CountModel model = CountModel::load(c.model_path());
  ResolvedEnv env = resolve_env(c);

  auto run = [&](uint64_t seed) {
    Planner planner = make_model_planner(model, env.mdp, c.decoder, seed);
    return rollout(env.mdp, planner, 1, seed).front();
  };
  const RolloutResult r1 = run(42), r2 = run(42), r3 = run(43);
  CHECK_FALSE(r1.failed);
  CHECK(r1.total_return == r2.total_return);
  REQUIRE(r1.episode.size() == r2.episode.size());
  for (size_t t = 0; t < r1.episode.size(); ++t)
    CHECK(r1.episode[t].action == r2.episode[t].action);
  // a fresh planner is created per episode, so seeds act independently
  CHECK(r3.episode.size() == r1.episode.size());
}
