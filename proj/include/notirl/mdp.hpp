#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "notirl/errors.hpp"
#include "notirl/matrix.hpp"

namespace notirl {

// Decision-time MDP over notification candidates. Timestamps are hours since
// episode start; steps are irregularly spaced, so every discount exponent is
// an elapsed time, never a step index.

enum class Action : int { NotSend = 0, Send = 1 };

inline constexpr std::size_t kNumActions = 2;

inline int action_index(Action a) { return static_cast<int>(a); }

inline const char* to_string(Action a) {
  return a == Action::Send ? "send" : "not_send";
}

// Raw reward components observed for one decision window (t_k, t_next]:
// site visits in the window, whether the sent notification was clicked, and
// a unit volume cost charged only on send.
struct RewardVector {
  int sessions = 0;
  int click = 0;
  int volume = 0;  // -1 on send, 0 otherwise
};

struct PreferenceVector {
  double sessions = 0.0;
  double clicks = 0.0;
  double volume = 0.0;
};

using StateFeatures = std::vector<double>;

struct Transition {
  std::uint64_t episode_id = 0;
  double t_k = 0.0;
  double t_next = 0.0;
  StateFeatures state;
  StateFeatures next_state;  // terminal steps repeat `state`; never used
  Action action = Action::NotSend;
  RewardVector reward;
  double behavior_propensity = 1.0;
  bool terminal = false;
};

struct Trajectory {
  std::uint64_t episode_id = 0;
  std::uint64_t user_id = 0;
  std::vector<Transition> steps;
};

struct DatasetProvenance {
  std::uint64_t seed = 0;
  std::string behavior_policy;
  std::string config_digest;
  std::string tool_version;
};

struct Dataset {
  std::vector<std::string> feature_schema;
  std::vector<Trajectory> trajectories;
  DatasetProvenance provenance;

  std::size_t n_transitions() const {
    std::size_t n = 0;
    for (const Trajectory& t : trajectories) n += t.steps.size();
    return n;
  }
};

inline double scalarize(const PreferenceVector& w, const RewardVector& m) {
  return w.sessions * m.sessions + w.clicks * m.click + w.volume * m.volume;
}

// Discounted episode return sum_k gamma^{t_next(k) - t_0} * r_k with t_0 the
// first decision time. `scalar_rewards` aligns with trajectory steps; pass
// scalarized or single-component values as needed.
inline double discounted_return(const Trajectory& traj, double gamma,
                                std::span<const double> scalar_rewards) {
  if (!(gamma > 0.0) || gamma > 1.0)
    throw ConfigError("discounted_return: gamma must lie in (0, 1]");
  if (scalar_rewards.size() != traj.steps.size())
    throw DataError("discounted_return: reward count mismatch");
  if (traj.steps.empty()) return 0.0;
  const double t0 = traj.steps.front().t_k;
  double total = 0.0;
  for (std::size_t k = 0; k < traj.steps.size(); ++k)
    total += std::pow(gamma, traj.steps[k].t_next - t0) * scalar_rewards[k];
  return total;
}

// Structural checks for one trajectory. Returns human-readable violations
// (empty means valid). `expected_dim` of 0 infers the dimension from the
// first step.
inline std::vector<std::string> validate_trajectory(
    const Trajectory& traj, std::size_t expected_dim = 0) {
  std::vector<std::string> out;
  auto flag = [&](std::size_t k, const std::string& msg) {
    out.push_back("step " + std::to_string(k) + ": " + msg);
  };
  std::size_t dim = expected_dim;
  for (std::size_t k = 0; k < traj.steps.size(); ++k) {
    const Transition& s = traj.steps[k];
    if (dim == 0) dim = s.state.size();
    if (s.episode_id != traj.episode_id)
      flag(k, "episode_id mismatch");
    if (s.state.size() != dim)
      flag(k, "state has " + std::to_string(s.state.size()) +
                  " features, expected " + std::to_string(dim));
    if (s.next_state.size() != dim)
      flag(k, "next_state dimension mismatch");
    if (!all_finite(s.state) || !all_finite(s.next_state))
      flag(k, "non-finite feature value");
    if (!(s.t_next > s.t_k))
      flag(k, "t_next must exceed t_k");
    if (k + 1 < traj.steps.size()) {
      const Transition& nxt = traj.steps[k + 1];
      if (s.terminal) flag(k, "terminal step is not last");
      if (s.t_next != nxt.t_k)
        flag(k, "t_next does not chain to the next step's t_k");
      if (s.next_state != nxt.state)
        flag(k, "next_state does not chain to the next step's state");
    } else if (!s.terminal) {
      flag(k, "last step must be terminal");
    }
    if (!(s.behavior_propensity > 0.0) || s.behavior_propensity > 1.0)
      flag(k, "behavior_propensity outside (0, 1]");
    if (s.reward.sessions < 0) flag(k, "negative session count");
    if (s.reward.click != 0 && s.reward.click != 1)
      flag(k, "click outside {0, 1}");
    if (s.action == Action::NotSend && s.reward.click != 0)
      flag(k, "click recorded without a send");
    const int expected_volume = s.action == Action::Send ? -1 : 0;
    if (s.reward.volume != expected_volume)
      flag(k, "volume must be -1 on send and 0 otherwise");
  }
  return out;
}

inline std::vector<std::string> validate_dataset(const Dataset& ds) {
  std::vector<std::string> out;
  const std::size_t dim = ds.feature_schema.size();
  for (const Trajectory& traj : ds.trajectories) {
    std::vector<std::string> v = validate_trajectory(traj, dim);
    for (std::string& msg : v)
      out.push_back("episode " + std::to_string(traj.episode_id) + ", " +
                    std::move(msg));
  }
  return out;
}

}  // namespace notirl
