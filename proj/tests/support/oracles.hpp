#pragma once

// Independent reference implementations that pin expected values in tests.
// Everything here is deliberately naive and shares no code with the library
// paths it checks: a separate forward pass, central finite differences,
// tabular value iteration and exhaustive path enumeration.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "notirl/mdp.hpp"
#include "notirl/mlp.hpp"
#include "notirl/rng.hpp"

namespace oracle {

// --------------------------------------------------------------------------
// Naive MLP forward for one row: plain nested loops, scalar activations.

inline std::vector<double> naive_mlp_forward_row(const notirl::MlpParams& p,
                                                 std::vector<double> x) {
  for (std::size_t layer = 0; layer < p.weights.size(); ++layer) {
    const notirl::DenseMatrix& w = p.weights[layer];
    std::vector<double> z(w.cols, 0.0);
    for (std::size_t c = 0; c < w.cols; ++c) {
      double acc = p.biases[layer][c];
      for (std::size_t r = 0; r < w.rows; ++r) acc += x[r] * w.at(r, c);
      z[c] = acc;
    }
    if (layer + 1 < p.weights.size()) {
      for (double& v : z) {
        if (p.activation == notirl::Activation::ReLU)
          v = v > 0.0 ? v : 0.0;
        else
          v = std::tanh(v);
      }
    }
    x = std::move(z);
  }
  return x;
}

// --------------------------------------------------------------------------
// Central finite differences over the canonical flattened parameter order.

inline std::vector<double> flatten_grads(const notirl::MlpGrads& g) {
  std::vector<double> flat;
  for (std::size_t i = 0; i < g.weights.size(); ++i) {
    flat.insert(flat.end(), g.weights[i].data.begin(), g.weights[i].data.end());
    flat.insert(flat.end(), g.biases[i].begin(), g.biases[i].end());
  }
  return flat;
}

template <class LossFn>
std::vector<double> fd_gradient(const notirl::MlpParams& params, LossFn&& loss,
                                double h = 1e-5) {
  notirl::MlpParams work = params;
  std::vector<double> flat = notirl::flatten_params(params);
  std::vector<double> grad(flat.size(), 0.0);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double orig = flat[i];
    flat[i] = orig + h;
    notirl::unflatten_params(work, flat);
    const double up = loss(work);
    flat[i] = orig - h;
    notirl::unflatten_params(work, flat);
    const double down = loss(work);
    flat[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  notirl::unflatten_params(work, flat);
  return grad;
}

// Passes when |a - b| <= max(rel * max(|a|, |b|), floor).
inline bool grad_close(double a, double b, double rel = 1e-4,
                       double floor = 1e-6) {
  const double diff = std::abs(a - b);
  return diff <= std::max(rel * std::max(std::abs(a), std::abs(b)), floor);
}

// --------------------------------------------------------------------------
// Tabular MDP with two actions: value iteration and an optimal policy.

struct TabularMdp {
  std::size_t n_states = 0;
  // p[s][a][s'], r[s][a]; uniform unit time between decisions.
  std::vector<std::array<std::vector<double>, 2>> p;
  std::vector<std::array<double, 2>> r;
  double gamma = 0.9;
};

inline std::vector<std::array<double, 2>> value_iteration(const TabularMdp& m,
                                                          int iters = 20000,
                                                          double tol = 1e-13) {
  std::vector<std::array<double, 2>> q(m.n_states, {0.0, 0.0});
  for (int it = 0; it < iters; ++it) {
    double delta = 0.0;
    std::vector<std::array<double, 2>> next = q;
    for (std::size_t s = 0; s < m.n_states; ++s)
      for (int a = 0; a < 2; ++a) {
        double v = m.r[s][a];
        for (std::size_t s2 = 0; s2 < m.n_states; ++s2)
          v += m.gamma * m.p[s][a][s2] * std::max(q[s2][0], q[s2][1]);
        delta = std::max(delta, std::abs(v - next[s][a]));
        next[s][a] = v;
      }
    q = next;
    if (delta < tol) break;
  }
  return q;
}

inline std::vector<int> optimal_actions(
    const std::vector<std::array<double, 2>>& q) {
  std::vector<int> out(q.size(), 0);
  for (std::size_t s = 0; s < q.size(); ++s)
    out[s] = q[s][1] > q[s][0] ? 1 : 0;
  return out;
}

// Four-state chain. NOT_SEND walks left, SEND walks right; the ends pay one
// unit for staying put. With gamma = 0.9 the optimal policy splits the chain
// in the middle (NOT_SEND on {0,1}, SEND on {2,3}) with action gaps of at
// least 0.9, which survive the conservative penalty's gap compression.
inline TabularMdp chain_mdp(double gamma = 0.9) {
  TabularMdp m;
  m.n_states = 4;
  m.gamma = gamma;
  m.p.assign(4, {std::vector<double>(4, 0.0), std::vector<double>(4, 0.0)});
  m.r.assign(4, {0.0, 0.0});
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t left = s == 0 ? 0 : s - 1;
    const std::size_t right = s == 3 ? 3 : s + 1;
    m.p[s][0][left] = 1.0;
    m.p[s][1][right] = 1.0;
  }
  m.r[0][0] = 1.0;
  m.r[3][1] = 1.0;
  return m;
}

inline notirl::StateFeatures one_hot(std::size_t s, std::size_t n) {
  notirl::StateFeatures f(n, 0.0);
  f[s] = 1.0;
  return f;
}

// Uniform (s, a) transitions through the chain dynamics. Each sample becomes
// its own non-terminal single-step trajectory so the trainer bootstraps on
// every row, matching the infinite-horizon solution value iteration computes.
struct ChainSamples {
  notirl::Dataset dataset;
  std::vector<std::vector<double>> rewards;
};

inline ChainSamples sample_chain_dataset(const TabularMdp& m, std::size_t n,
                                         std::uint64_t seed) {
  ChainSamples out;
  out.dataset.feature_schema = {"s0", "s1", "s2", "s3"};
  notirl::Rng rng = notirl::substream(seed, "chain");
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = rng.index(m.n_states);
    const int a = static_cast<int>(rng.index(2));
    std::size_t s2 = 0;
    for (; s2 < m.n_states; ++s2)
      if (m.p[s][a][s2] == 1.0) break;
    notirl::Transition tr;
    tr.episode_id = i;
    tr.t_k = 0.0;
    tr.t_next = 1.0;
    tr.state = one_hot(s, m.n_states);
    tr.next_state = one_hot(s2, m.n_states);
    tr.action = static_cast<notirl::Action>(a);
    tr.behavior_propensity = 0.5;
    tr.terminal = false;
    notirl::Trajectory traj;
    traj.episode_id = i;
    traj.user_id = i;
    traj.steps.push_back(std::move(tr));
    out.dataset.trajectories.push_back(std::move(traj));
    out.rewards.push_back({m.r[s][a]});
  }
  return out;
}

// --------------------------------------------------------------------------
// Two-state evaluation MDP with known behavior/target policies. Used for the
// importance-sampling oracles: exact J by exhaustive path enumeration (any
// horizon; paths = (2 actions x 2 states)^T) and dataset sampling.

struct EvalMdp {
  // p1[s][a] = P(next state = 1), r[s][a] deterministic reward.
  std::array<std::array<double, 2>, 2> p1 = {{{0.7, 0.2}, {0.4, 0.9}}};
  std::array<std::array<double, 2>, 2> r = {{{1.0, -0.5}, {0.25, 2.0}}};
  std::array<std::array<double, 2>, 2> behavior = {{{0.6, 0.4}, {0.3, 0.7}}};
  std::array<std::array<double, 2>, 2> target = {{{0.2, 0.8}, {0.9, 0.1}}};
  double gamma = 0.8;
  int horizon = 2;
};

// Expected discounted return of the target policy from state 0, by summing
// over every action/state path. Discount exponents follow the convention
// that step k's reward is realized at time k+1.
inline double enumerate_target_value(const EvalMdp& m) {
  std::function<double(int, int, double)> rec = [&](int s, int k,
                                                    double prob) -> double {
    if (k == m.horizon) return 0.0;
    double total = 0.0;
    for (int a = 0; a < 2; ++a) {
      const double pa = m.target[s][a];
      if (pa == 0.0) continue;
      const double disc = std::pow(m.gamma, k + 1);
      total += prob * pa * disc * m.r[s][a];
      for (int s2 = 0; s2 < 2; ++s2) {
        const double ps = s2 == 1 ? m.p1[s][a] : 1.0 - m.p1[s][a];
        if (ps == 0.0) continue;
        total += rec(s2, k + 1, prob * pa * ps);
      }
    }
    return total;
  };
  return rec(0, 0, 1.0);
}

inline notirl::Trajectory sample_eval_trajectory(const EvalMdp& m,
                                                 std::uint64_t episode_id,
                                                 notirl::Rng& rng) {
  notirl::Trajectory traj;
  traj.episode_id = episode_id;
  traj.user_id = episode_id;
  int s = 0;
  for (int k = 0; k < m.horizon; ++k) {
    const int a = rng.uniform01() < m.behavior[s][0] ? 0 : 1;
    const int s2 = rng.uniform01() < m.p1[s][a] ? 1 : 0;
    notirl::Transition tr;
    tr.episode_id = episode_id;
    tr.t_k = static_cast<double>(k);
    tr.t_next = static_cast<double>(k + 1);
    tr.state = {static_cast<double>(s)};
    tr.next_state = {static_cast<double>(s2)};
    tr.action = static_cast<notirl::Action>(a);
    tr.behavior_propensity = m.behavior[s][a];
    tr.reward.sessions = 0;
    tr.terminal = k + 1 == m.horizon;
    traj.steps.push_back(std::move(tr));
    s = s2;
  }
  return traj;
}

struct EvalSamples {
  notirl::Dataset dataset;
  std::vector<std::vector<double>> rewards;
};

inline EvalSamples sample_eval_dataset(const EvalMdp& m, std::size_t n_traj,
                                       std::uint64_t seed) {
  EvalSamples out;
  out.dataset.feature_schema = {"state"};
  notirl::Rng rng = notirl::substream(seed, "evalmdp");
  for (std::size_t i = 0; i < n_traj; ++i) {
    notirl::Trajectory traj = sample_eval_trajectory(m, i, rng);
    std::vector<double> r(traj.steps.size(), 0.0);
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
      const int s = static_cast<int>(traj.steps[k].state[0]);
      const int a = notirl::action_index(traj.steps[k].action);
      r[k] = m.r[s][a];
    }
    out.dataset.trajectories.push_back(std::move(traj));
    out.rewards.push_back(std::move(r));
  }
  return out;
}

inline std::function<double(const notirl::Transition&)> eval_target_propensity(
    const EvalMdp& m) {
  return [m](const notirl::Transition& tr) {
    const int s = static_cast<int>(tr.state[0]);
    return m.target[s][notirl::action_index(tr.action)];
  };
}

// Empirical mean of the discounted behavior-policy return, written as the
// plain formula so estimator shortcuts cannot hide in both sides.
inline double empirical_mean_return(const EvalSamples& samples, double gamma) {
  double total = 0.0;
  for (std::size_t i = 0; i < samples.dataset.trajectories.size(); ++i) {
    const notirl::Trajectory& traj = samples.dataset.trajectories[i];
    const double t0 = traj.steps.front().t_k;
    double g = 0.0;
    for (std::size_t k = 0; k < traj.steps.size(); ++k)
      g += std::pow(gamma, traj.steps[k].t_next - t0) * samples.rewards[i][k];
    total += g;
  }
  return total / static_cast<double>(samples.dataset.trajectories.size());
}

// --------------------------------------------------------------------------
// Simple statistics shared by tests.

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

inline double pearson(const std::vector<double>& a,
                      const std::vector<double>& b) {
  const double ma = mean_of(a), mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

inline std::vector<double> ranks_of(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size(), 0.0);
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a,
                       const std::vector<double>& b) {
  return pearson(ranks_of(a), ranks_of(b));
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace oracle
