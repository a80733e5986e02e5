#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "notirl/errors.hpp"
#include "notirl/features.hpp"
#include "notirl/matrix.hpp"
#include "notirl/mdp.hpp"
#include "notirl/mlp.hpp"
#include "notirl/reward_models.hpp"
#include "notirl/rng.hpp"

namespace notirl {

// Offline Q-learning on logged transitions. Bootstrap targets discount by
// elapsed time between decisions (gamma^{t_next - t_k}), terminal steps drop
// the bootstrap term, and a conservative penalty pushes Q down on actions the
// logging policy never took.

enum class TargetKind { Dqn, Ddqn };

inline const char* to_string(TargetKind k) {
  return k == TargetKind::Ddqn ? "ddqn" : "dqn";
}

struct TrainConfig {
  double gamma = 0.99;
  double alpha = 0.5;  // conservative penalty weight; 0 recovers plain (D)DQN
  std::size_t batch_size = 64;
  std::size_t epochs = 4;
  std::size_t target_sync_every = 100;  // hard target copy period, in steps
  double learning_rate = 0.01;
  std::vector<std::size_t> hidden_dims = {64, 32};
  Activation activation = Activation::ReLU;
  OptKind optimizer = OptKind::Sgd;
  double momentum = 0.0;
  TargetKind target_kind = TargetKind::Ddqn;
  std::uint64_t seed = 7;
};

inline void validate(const TrainConfig& c) {
  auto bad = [](const std::string& f) {
    throw ConfigError("train config: invalid " + f);
  };
  if (!(c.gamma > 0.0) || c.gamma > 1.0) bad("gamma (need (0, 1])");
  if (!(c.alpha >= 0.0) || !std::isfinite(c.alpha)) bad("alpha (need >= 0)");
  if (c.batch_size == 0) bad("batch_size");
  if (c.target_sync_every == 0) bad("target_sync_every");
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate))
    bad("learning_rate");
  for (std::size_t h : c.hidden_dims)
    if (h == 0) bad("hidden_dims (zero-width layer)");
  if (c.optimizer == OptKind::SgdMomentum &&
      (!(c.momentum >= 0.0) || c.momentum >= 1.0))
    bad("momentum (need [0, 1))");
}

// Minibatch in model (standardized) feature space.
struct TransitionBatch {
  DenseMatrix states;
  DenseMatrix next_states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> dt;  // t_next - t_k, hours
  std::vector<char> terminal;

  std::size_t size() const { return actions.size(); }
};

namespace detail {

inline std::size_t argmax_row(std::span<const double> q) {
  // Ties resolve to the lowest index, i.e. NOT_SEND.
  std::size_t best = 0;
  for (std::size_t j = 1; j < q.size(); ++j)
    if (q[j] > q[best]) best = j;
  return best;
}

}  // namespace detail

// Max-form target: Y = r + gamma^{dt} * max_a Q(s', a) on the same network
// that is being updated. Terminal steps keep only the reward.
inline std::vector<double> dqn_target(const TransitionBatch& b,
                                      const MlpParams& q_params,
                                      double gamma) {
  const DenseMatrix q_next = mlp_forward(q_params, b.next_states);
  std::vector<double> y(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    y[i] = b.rewards[i];
    if (!b.terminal[i]) {
      const auto row = q_next.row(i);
      y[i] += std::pow(gamma, b.dt[i]) * row[detail::argmax_row(row)];
    }
  }
  return y;
}

// Double form: the online network picks the argmax action, the target
// network scores it.
inline std::vector<double> ddqn_target(const TransitionBatch& b,
                                       const MlpParams& online,
                                       const MlpParams& target,
                                       double gamma) {
  const DenseMatrix q_sel = mlp_forward(online, b.next_states);
  const DenseMatrix q_eval = mlp_forward(target, b.next_states);
  std::vector<double> y(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    y[i] = b.rewards[i];
    if (!b.terminal[i]) {
      const std::size_t a_star = detail::argmax_row(q_sel.row(i));
      y[i] += std::pow(gamma, b.dt[i]) * q_eval.at(i, a_star);
    }
  }
  return y;
}

// Conservative gap for one state: logsumexp over all actions minus the Q of
// the logged action. Always >= 0 up to rounding when the logged action is
// the max, and grows as Q mass moves to unlogged actions.
inline double cql_penalty(std::span<const double> q_row, Action logged) {
  return logsumexp(q_row) - q_row[static_cast<std::size_t>(action_index(logged))];
}

struct LossValue {
  double total = 0.0;
  double bellman_mse = 0.0;  // mean squared TD error (before the 1/2 factor)
  double cql_penalty = 0.0;  // mean conservative gap
};

// Loss and analytic gradient with the bootstrap targets held fixed
// (semi-gradient). total = alpha * mean(penalty) + 0.5 * mean((Q - Y)^2).
inline std::pair<LossValue, MlpGrads> cql_loss_given_targets(
    const MlpParams& params, const TransitionBatch& b,
    std::span<const double> targets, double alpha) {
  if (targets.size() != b.size())
    throw DataError("cql_loss: target count mismatch");
  const double m = static_cast<double>(b.size());
  const DenseMatrix q = mlp_forward(params, b.states);

  LossValue loss;
  DenseMatrix dq(q.rows, q.cols, 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto row = q.row(i);
    const std::size_t a = static_cast<std::size_t>(b.actions[i]);
    const double diff = row[a] - targets[i];
    loss.bellman_mse += diff * diff;
    dq.at(i, a) += diff / m;
    if (alpha != 0.0) {
      const double lse = logsumexp(row);
      loss.cql_penalty += lse - row[a];
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double soft = std::exp(row[j] - lse);
        dq.at(i, j) += alpha / m * (soft - (j == a ? 1.0 : 0.0));
      }
    }
  }
  loss.bellman_mse /= m;
  loss.cql_penalty /= m;
  loss.total = alpha * loss.cql_penalty + 0.5 * loss.bellman_mse;
  if (!std::isfinite(loss.total))
    throw NumericError("cql_loss: non-finite loss");
  return {loss, mlp_backward(params, b.states, dq)};
}

inline std::pair<LossValue, MlpGrads> cql_loss(const TransitionBatch& b,
                                               const MlpParams& online,
                                               const MlpParams& target,
                                               const TrainConfig& config) {
  const std::vector<double> y =
      config.target_kind == TargetKind::Ddqn
          ? ddqn_target(b, online, target, config.gamma)
          : dqn_target(b, online, config.gamma);
  return cql_loss_given_targets(online, b, y, config.alpha);
}

// Trained policy: the Q network plus the input standardization and feature
// schema it was fitted against.
struct QPolicy {
  MlpParams params;
  FeatureTransform transform;
  std::vector<std::string> feature_schema;

  std::array<double, kNumActions> q_values(const StateFeatures& raw) const {
    DenseMatrix x(1, raw.size());
    std::copy(raw.begin(), raw.end(), x.data.begin());
    const DenseMatrix z = transform.transform_rows(x);
    const DenseMatrix q = mlp_forward(params, z);
    return {q.at(0, 0), q.at(0, 1)};
  }
};

inline Action greedy_action(const QPolicy& p, const StateFeatures& s) {
  const auto q = p.q_values(s);
  return q[1] > q[0] ? Action::Send : Action::NotSend;  // tie -> NOT_SEND
}

// Smoothed evaluation-policy propensities for importance sampling. Greedy
// policies get epsilon mixed in (epsilon must be positive so every logged
// action keeps support); softmax uses a temperature over Q values.
struct Smoothing {
  enum class Kind { EpsilonGreedy, Softmax };
  Kind kind = Kind::EpsilonGreedy;
  double epsilon = 0.05;
  double temperature = 1.0;
};

inline ActionDist policy_propensity(const QPolicy& p, const StateFeatures& s,
                                    const Smoothing& smoothing) {
  const auto q = p.q_values(s);
  if (smoothing.kind == Smoothing::Kind::EpsilonGreedy) {
    if (!(smoothing.epsilon > 0.0) || smoothing.epsilon > 1.0)
      throw ConfigError("policy_propensity: epsilon must lie in (0, 1]");
    const Action pick = q[1] > q[0] ? Action::Send : Action::NotSend;
    return {epsilon_greedy_propensity(pick, Action::NotSend, smoothing.epsilon),
            epsilon_greedy_propensity(pick, Action::Send, smoothing.epsilon)};
  }
  if (!(smoothing.temperature > 0.0))
    throw ConfigError("policy_propensity: temperature must be > 0");
  const std::array<double, kNumActions> v = {q[0] / smoothing.temperature,
                                             q[1] / smoothing.temperature};
  const double lse = logsumexp(v);
  return {std::exp(v[0] - lse), std::exp(v[1] - lse)};
}

struct TrainReport {
  struct StepRecord {
    std::size_t step = 0;
    double bellman_mse = 0.0;
    double cql_penalty = 0.0;
    double total_loss = 0.0;
  };
  struct EpochRecord {
    std::size_t epoch = 0;
    std::size_t at_step = 0;
    double mean_data_q = 0.0;       // mean Q(s, a_logged) over the dataset
    double mean_logsumexp_q = 0.0;  // mean logsumexp_a Q(s, a)
  };
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::size_t dataset_size = 0;
  std::size_t n_steps = 0;
};

// Step-level hook for tests and instrumentation.
struct StepInfo {
  std::size_t step = 0;
  const MlpParams& online;
  const MlpParams& target;
  bool synced = false;
};
using StepObserver = std::function<void(const StepInfo&)>;

// Full training loop: (dataset_size / batch_size) * epochs uniformly random
// minibatch steps with a hard target sync every target_sync_every steps.
// `scalar_rewards` aligns with ds.trajectories (see build_scalar_rewards).
// Weight init draws from substream(seed, "init"), minibatch indices from
// substream(seed, "batch"), so runs are reproducible end to end.
inline std::pair<QPolicy, TrainReport> train(
    const Dataset& ds, const std::vector<std::vector<double>>& scalar_rewards,
    const TrainConfig& config, const StepObserver& observer = {}) {
  validate(config);
  if (ds.feature_schema.empty())
    throw DataError("train: dataset has an empty feature schema");
  if (scalar_rewards.size() != ds.trajectories.size())
    throw DataError("train: reward rows do not align with trajectories");

  const std::size_t dim = ds.feature_schema.size();
  std::size_t n = 0;
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    if (scalar_rewards[i].size() != ds.trajectories[i].steps.size())
      throw DataError("train: reward row length mismatch at trajectory " +
                      std::to_string(i));
    n += ds.trajectories[i].steps.size();
  }
  if (n == 0) throw DataError("train: dataset has no transitions");
  if (n < config.batch_size)
    throw ConfigError("train config: batch_size exceeds dataset size");

  DenseMatrix raw_states(n, dim);
  DenseMatrix raw_next(n, dim);
  std::vector<int> actions(n);
  std::vector<double> rewards(n), dts(n);
  std::vector<char> terminal(n);
  {
    std::size_t row = 0;
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i)
      for (std::size_t k = 0; k < ds.trajectories[i].steps.size(); ++k) {
        const Transition& tr = ds.trajectories[i].steps[k];
        if (tr.state.size() != dim || tr.next_state.size() != dim)
          throw DataError("train: transition dimension mismatch");
        const double r = scalar_rewards[i][k];
        if (!std::isfinite(r))
          throw DataError("train: non-finite scalar reward");
        std::copy(tr.state.begin(), tr.state.end(), raw_states.row(row).begin());
        std::copy(tr.next_state.begin(), tr.next_state.end(),
                  raw_next.row(row).begin());
        actions[row] = action_index(tr.action);
        rewards[row] = r;
        dts[row] = tr.t_next - tr.t_k;
        terminal[row] = tr.terminal ? 1 : 0;
        ++row;
      }
  }

  std::vector<StateFeatures> state_rows(n);
  for (std::size_t i = 0; i < n; ++i)
    state_rows[i].assign(raw_states.row(i).begin(), raw_states.row(i).end());
  const FeatureTransform ft = FeatureTransform::fit(state_rows);
  const DenseMatrix states = ft.transform_rows(raw_states);
  const DenseMatrix next_states = ft.transform_rows(raw_next);

  std::vector<std::size_t> dims;
  dims.push_back(dim);
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  dims.push_back(kNumActions);
  Rng init_rng = substream(config.seed, "init");
  MlpParams online = make_mlp(dims, config.activation, init_rng);
  MlpParams target = online;
  OptState opt = make_opt_state(online, config.optimizer,
                                config.learning_rate, config.momentum);

  const std::size_t steps_per_epoch = n / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  TrainReport report;
  report.dataset_size = n;
  report.n_steps = total_steps;

  Rng batch_rng = substream(config.seed, "batch");
  TransitionBatch b;
  const std::size_t m = config.batch_size;
  b.states = DenseMatrix(m, dim);
  b.next_states = DenseMatrix(m, dim);
  b.actions.resize(m);
  b.rewards.resize(m);
  b.dt.resize(m);
  b.terminal.resize(m);

  for (std::size_t step = 1; step <= total_steps; ++step) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t idx = batch_rng.index(n);
      std::copy(states.row(idx).begin(), states.row(idx).end(),
                b.states.row(i).begin());
      std::copy(next_states.row(idx).begin(), next_states.row(idx).end(),
                b.next_states.row(i).begin());
      b.actions[i] = actions[idx];
      b.rewards[i] = rewards[idx];
      b.dt[i] = dts[idx];
      b.terminal[i] = terminal[idx];
    }
    LossValue loss;
    MlpGrads grads;
    try {
      std::tie(loss, grads) = cql_loss(b, online, target, config);
      opt_step(online, grads, opt);
    } catch (const NumericError& e) {
      throw NumericError("train: diverged at step " + std::to_string(step) +
                         " (" + e.what() + ")");
    }
    const bool synced = step % config.target_sync_every == 0;
    if (synced) target = online;
    report.steps.push_back({step, loss.bellman_mse, loss.cql_penalty,
                            loss.total});
    if (observer) observer({step, online, target, synced});

    if (step % steps_per_epoch == 0) {
      const DenseMatrix q_all = mlp_forward(online, states);
      double mean_data_q = 0.0, mean_lse = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        mean_data_q += q_all.at(i, static_cast<std::size_t>(actions[i]));
        mean_lse += logsumexp(q_all.row(i));
      }
      report.epochs.push_back({step / steps_per_epoch, step,
                               mean_data_q / static_cast<double>(n),
                               mean_lse / static_cast<double>(n)});
    }
  }

  QPolicy policy;
  policy.params = std::move(online);
  policy.transform = ft;
  policy.feature_schema = ds.feature_schema;
  return {std::move(policy), std::move(report)};
}

// Adapts a trained Q policy to the simulator's policy interface.
inline PolicyFn greedy_policy_fn(const QPolicy& p) {
  return [p](const StateFeatures& s) -> ActionDist {
    ActionDist d{0.0, 0.0};
    d[static_cast<std::size_t>(action_index(greedy_action(p, s)))] = 1.0;
    return d;
  };
}

inline PolicyFn smoothed_policy_fn(const QPolicy& p, const Smoothing& sm) {
  return [p, sm](const StateFeatures& s) { return policy_propensity(p, s, sm); };
}

}  // namespace notirl
