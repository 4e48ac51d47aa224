#include "pbs/discretizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace pbs {

int ChannelSpec::encode(double v) const {
  if (!std::isfinite(v)) throw std::invalid_argument("encode: non-finite value");
  if (v <= lo) return 0;
  if (v >= hi) return bins - 1;
  int t = static_cast<int>((v - lo) / width());
  return std::clamp(t, 0, bins - 1);
}

double ChannelSpec::decode(int token) const {
  if (token < 0 || token >= bins) throw std::out_of_range("decode: token out of range");
  return lo + (token + 0.5) * width();
}

std::vector<double> ChannelSpec::bin_values() const {
  std::vector<double> v(bins);
  for (int t = 0; t < bins; ++t) v[t] = decode(t);
  return v;
}

void ChannelSpec::validate() const {
  if (bins < 2) throw std::invalid_argument("channel needs at least 2 bins");
  if (!(lo < hi)) throw std::invalid_argument("channel range must satisfy lo < hi");
}

DiscretizerSpec::DiscretizerSpec(std::vector<ChannelSpec> state, std::vector<ChannelSpec> action,
                                 ChannelSpec reward, ChannelSpec rtg)
    : state_(std::move(state)), action_(std::move(action)), reward_(reward), rtg_(rtg) {
  if (state_.empty() || action_.empty())
    throw std::invalid_argument("discretizer needs at least one state and one action channel");
  for (const auto& c : state_) c.validate();
  for (const auto& c : action_) c.validate();
  reward_.validate();
  rtg_.validate();
}

const ChannelSpec& DiscretizerSpec::channel(int idx) const {
  const int k = state_dim();
  const int m = action_dim();
  if (idx < 0 || idx >= tokens_per_transition()) throw std::out_of_range("bad channel index");
  if (idx < k) return state_[idx];
  if (idx < k + m) return action_[idx - k];
  return idx == k + m ? reward_ : rtg_;
}

namespace {
nlohmann::json channel_json(const ChannelSpec& c) {
  return {{"bins", c.bins}, {"min", c.lo}, {"max", c.hi}};
}
ChannelSpec channel_from_json(const nlohmann::json& j) {
  ChannelSpec c{j.at("bins").get<int>(), j.at("min").get<double>(), j.at("max").get<double>()};
  c.validate();
  return c;
}
}  // namespace

std::string DiscretizerSpec::to_json_string() const {
  nlohmann::json j;
  for (const auto& c : state_) j["state"].push_back(channel_json(c));
  for (const auto& c : action_) j["action"].push_back(channel_json(c));
  j["reward"] = channel_json(reward_);
  j["rtg"] = channel_json(rtg_);
  return j.dump(2);
}

DiscretizerSpec DiscretizerSpec::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  std::vector<ChannelSpec> state, action;
  for (const auto& c : j.at("state")) state.push_back(channel_from_json(c));
  for (const auto& c : j.at("action")) action.push_back(channel_from_json(c));
  return DiscretizerSpec(std::move(state), std::move(action), channel_from_json(j.at("reward")),
                         channel_from_json(j.at("rtg")));
}

void DiscretizerSpec::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write discretizer file: " + path);
  out << to_json_string() << "\n";
}

DiscretizerSpec DiscretizerSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read discretizer file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

}  // namespace pbs
