#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pbs {

// Uniform-width binning for one real-valued channel.
struct ChannelSpec {
  int bins = 2;
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return (hi - lo) / bins; }

  // Out-of-range values clamp to the boundary bins.
  int encode(double v) const;

  // Decoded value is the bin midpoint.
  double decode(int token) const;

  std::vector<double> bin_values() const;

  void validate() const;
};

// Per-channel discretization for a flattened transition:
// K state dims, M action dims, reward, reward-to-go.
class DiscretizerSpec {
 public:
  DiscretizerSpec() = default;
  DiscretizerSpec(std::vector<ChannelSpec> state, std::vector<ChannelSpec> action,
                  ChannelSpec reward, ChannelSpec rtg);

  int state_dim() const { return static_cast<int>(state_.size()); }
  int action_dim() const { return static_cast<int>(action_.size()); }
  int tokens_per_transition() const { return state_dim() + action_dim() + 2; }

  // Channels indexed in flattened order: states, actions, reward, rtg.
  const ChannelSpec& channel(int idx) const;
  const ChannelSpec& state_channel(int d) const { return state_.at(d); }
  const ChannelSpec& action_channel(int d) const { return action_.at(d); }
  const ChannelSpec& reward_channel() const { return reward_; }
  const ChannelSpec& rtg_channel() const { return rtg_; }

  int encode(int channel_idx, double v) const { return channel(channel_idx).encode(v); }
  double decode(int channel_idx, int token) const { return channel(channel_idx).decode(token); }

  std::string to_json_string() const;
  static DiscretizerSpec from_json_string(const std::string& text);
  void save(const std::string& path) const;
  static DiscretizerSpec load(const std::string& path);

 private:
  std::vector<ChannelSpec> state_;
  std::vector<ChannelSpec> action_;
  ChannelSpec reward_;
  ChannelSpec rtg_;
};

}  // namespace pbs
