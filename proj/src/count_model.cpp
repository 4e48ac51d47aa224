#include "pbs/count_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace pbs {

void CategoricalOverBins::validate() const {
  if (probs.empty() || probs.size() != bin_values.size())
    throw std::invalid_argument("categorical: size mismatch");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("categorical: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("categorical: probabilities do not sum to 1");
}

int CategoricalOverBins::modal() const {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double CategoricalOverBins::log_prob(int token) const { return std::log(probs.at(token)); }

int CategoricalOverBins::sample(std::mt19937_64& rng) const {
  // Hand-rolled inverse CDF so draws are reproducible across library versions.
  const double u = (rng() >> 11) * 0x1.0p-53;
  double acc = 0.0;
  for (int i = 0; i < size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return size() - 1;
}

SampledTransition sample_transition(const SequenceModel& model, std::span<const int> context,
                                    double temperature, std::mt19937_64& rng,
                                    std::span<const int> forced_state) {
  const DiscretizerSpec& spec = model.discretizer();
  const int k = spec.state_dim();
  const int m = spec.action_dim();
  if (!forced_state.empty() && static_cast<int>(forced_state.size()) != k)
    throw std::invalid_argument("sample_transition: forced state has wrong dimension");

  SampledTransition out;
  std::vector<int> ctx(context.begin(), context.end());
  for (int j = 0; j < k + m + 2; ++j) {
    CategoricalOverBins dist = model.next_token_dist(ctx, j, temperature);
    int token;
    if (j < k && !forced_state.empty()) {
      token = forced_state[j];
    } else {
      token = dist.sample(rng);
    }
    // Temperature only shapes the proposal; log-probs and the recorded
    // reward/rtg distributions use the model's own beliefs.
    CategoricalOverBins base =
        temperature == 1.0 ? std::move(dist) : model.next_token_dist(ctx, j, 1.0);
    out.log_prob += base.log_prob(token);
    if (j < k) {
      out.transition.state_tokens.push_back(token);
    } else if (j < k + m) {
      out.transition.action_tokens.push_back(token);
    } else if (j == k + m) {
      out.transition.reward_token = token;
      out.reward_dist = std::move(base);
    } else {
      out.transition.rtg_token = token;
      out.rtg_dist = std::move(base);
    }
    ctx.push_back(token);
  }
  return out;
}

namespace {

std::string context_key(std::span<const int> context, int window) {
  const size_t start = context.size() > static_cast<size_t>(window) ? context.size() - window : 0;
  std::string key;
  for (size_t i = start; i < context.size(); ++i) {
    if (!key.empty()) key += ',';
    key += std::to_string(context[i]);
  }
  return key;
}

}  // namespace

CountModel train_count_model(const std::vector<Trajectory>& dataset, const DiscretizerSpec& spec,
                             int window, double lambda) {
  if (dataset.empty()) throw std::invalid_argument("train_count_model: empty dataset");
  if (!(lambda > 0.0)) throw std::invalid_argument("train_count_model: lambda must be > 0");
  if (window == 0) window = spec.tokens_per_transition();
  if (window < 1) throw std::invalid_argument("train_count_model: window must be >= 1");

  int max_len = 0;
  for (const auto& traj : dataset) max_len = std::max(max_len, traj.token_length());
  if (window > max_len)
    throw std::invalid_argument("train_count_model: window exceeds every trajectory length");

  CountModel model;
  model.spec_ = spec;
  model.window_ = window;
  model.lambda_ = lambda;
  const int per = spec.tokens_per_transition();
  model.tables_.resize(per);
  for (const auto& traj : dataset) {
    const std::vector<int> tokens = traj.flat_tokens();
    for (size_t i = 0; i < tokens.size(); ++i) {
      const int channel = static_cast<int>(i % per);
      const size_t start = i > static_cast<size_t>(window) ? i - window : 0;
      const std::string key =
          context_key(std::span<const int>(tokens.data() + start, i - start), window);
      auto& counts = model.tables_[channel][key];
      if (counts.empty()) counts.assign(spec.channel(channel).bins, 0);
      counts[tokens[i]] += 1;
    }
  }
  return model;
}

const std::vector<uint32_t>* CountModel::lookup(std::span<const int> context, int channel) const {
  const auto& table = tables_.at(channel);
  auto it = table.find(context_key(context, window_));
  return it == table.end() ? nullptr : &it->second;
}

double CountModel::token_prob(std::span<const int> context, int channel, int token) const {
  const int v = spec_.channel(channel).bins;
  const std::vector<uint32_t>* counts = lookup(context, channel);
  double c = counts ? (*counts)[token] : 0.0;
  double total = 0.0;
  if (counts)
    for (uint32_t n : *counts) total += n;
  return (c + lambda_) / (total + lambda_ * v);
}

CategoricalOverBins CountModel::next_token_dist(std::span<const int> context, int channel,
                                                double temperature) const {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  const ChannelSpec& ch = spec_.channel(channel);
  if (ch.bins < 1) throw std::invalid_argument("empty vocabulary");

  CategoricalOverBins dist;
  dist.bin_values = ch.bin_values();
  dist.probs.resize(ch.bins);
  for (int t = 0; t < ch.bins; ++t) dist.probs[t] = token_prob(context, channel, t);

  if (temperature != 1.0) {
    // Scale log-probabilities by 1/temperature, then renormalize.
    double total = 0.0;
    for (double& p : dist.probs) {
      p = std::pow(p, 1.0 / temperature);
      total += p;
    }
    for (double& p : dist.probs) p /= total;
  }
  return dist;
}

double CountModel::log_likelihood(const std::vector<Trajectory>& trajectories) const {
  const int per = spec_.tokens_per_transition();
  double total = 0.0;
  size_t n = 0;
  for (const auto& traj : trajectories) {
    const std::vector<int> tokens = traj.flat_tokens();
    for (size_t i = 0; i < tokens.size(); ++i) {
      const int channel = static_cast<int>(i % per);
      total += std::log(
          token_prob(std::span<const int>(tokens.data(), i), channel, tokens[i]));
      ++n;
    }
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

std::string CountModel::to_json_string() const {
  nlohmann::json j;
  j["discretizer"] = nlohmann::json::parse(spec_.to_json_string());
  j["window"] = window_;
  j["lambda"] = lambda_;
  auto& tables = j["tables"] = nlohmann::json::array();
  for (const auto& table : tables_) {
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [key, counts] : table) t[key] = counts;
    tables.push_back(std::move(t));
  }
  return j.dump();
}

CountModel CountModel::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  CountModel model;
  model.spec_ = DiscretizerSpec::from_json_string(j.at("discretizer").dump());
  model.window_ = j.at("window").get<int>();
  model.lambda_ = j.at("lambda").get<double>();
  for (const auto& t : j.at("tables")) {
    std::map<std::string, std::vector<uint32_t>> table;
    for (auto it = t.begin(); it != t.end(); ++it)
      table[it.key()] = it.value().get<std::vector<uint32_t>>();
    model.tables_.push_back(std::move(table));
  }
  return model;
}

void CountModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << to_json_string() << "\n";
}

CountModel CountModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read model file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

}  // namespace pbs
