#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "notirl/errors.hpp"
#include "notirl/mdp.hpp"
#include "notirl/trainer.hpp"

namespace notirl {

// Importance-sampling off-policy evaluation. A trajectory's step k carries
// the logged reward, the logged (behavior) propensity, the evaluation
// policy's propensity for the same action, and the elapsed-time discount
// gamma^{t_next - t_0}.

enum class EstimatorKind { TrajectoryIs, PerDecisionIs, OneStepIs };

inline const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::TrajectoryIs: return "trajectory_is";
    case EstimatorKind::PerDecisionIs: return "per_decision_is";
    default: return "one_step_is";
  }
}

struct OpeTrajectory {
  std::vector<double> rewards;
  std::vector<double> behavior;  // logged propensities, must be positive
  std::vector<double> target;    // evaluation propensities, must be >= 0
  std::vector<double> discount;  // gamma^{t_next - t_0} per step
};

struct WeightDiagnostics {
  double max_weight = 0.0;
  double mean_weight = 0.0;
  double weight_variance = 0.0;
  double top_share = 0.0;  // weight mass held by the top 1% of units (>= 1)
};

struct OpeEstimate {
  EstimatorKind kind = EstimatorKind::PerDecisionIs;
  double value = 0.0;
  double stderr_ = 0.0;
  double ess = 0.0;  // effective sample size of the unit weights
  std::size_t n_units = 0;
  bool self_normalized = false;
  WeightDiagnostics diagnostics;
};

// (sum w)^2 / sum w^2; equals n for uniform weights and degrades toward 1 as
// the weight mass concentrates.
inline double effective_sample_size(std::span<const double> weights) {
  if (weights.empty()) throw DataError("effective_sample_size: no weights");
  double s = 0.0, sq = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DataError("effective_sample_size: negative weight");
    s += w;
    sq += w * w;
  }
  if (sq == 0.0) return 0.0;
  return s * s / sq;
}

// Builds estimator inputs from a dataset plus per-step scalar rewards and a
// target-propensity callback (probability the evaluation policy assigns to
// the logged action in the logged state).
inline std::vector<OpeTrajectory> make_ope_inputs(
    const Dataset& ds, const std::vector<std::vector<double>>& rewards,
    const std::function<double(const Transition&)>& target_propensity,
    double gamma) {
  if (!(gamma > 0.0) || gamma > 1.0)
    throw ConfigError("make_ope_inputs: gamma must lie in (0, 1]");
  if (rewards.size() != ds.trajectories.size())
    throw DataError("make_ope_inputs: reward rows do not align");
  std::size_t unsupported = 0;
  for (const Trajectory& traj : ds.trajectories)
    for (const Transition& tr : traj.steps)
      if (!(tr.behavior_propensity > 0.0)) ++unsupported;
  if (unsupported > 0)
    throw DataError("make_ope_inputs: " + std::to_string(unsupported) +
                    " transition(s) with non-positive behavior propensity");
  std::vector<OpeTrajectory> out;
  out.reserve(ds.trajectories.size());
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const Trajectory& traj = ds.trajectories[i];
    if (rewards[i].size() != traj.steps.size())
      throw DataError("make_ope_inputs: reward length mismatch at trajectory " +
                      std::to_string(i));
    OpeTrajectory t;
    const double t0 = traj.steps.empty() ? 0.0 : traj.steps.front().t_k;
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
      const Transition& tr = traj.steps[k];
      const double tp = target_propensity(tr);
      if (!(tp >= 0.0) || tp > 1.0 || !std::isfinite(tp))
        throw DataError("make_ope_inputs: target propensity outside [0, 1]");
      t.rewards.push_back(rewards[i][k]);
      t.behavior.push_back(tr.behavior_propensity);
      t.target.push_back(tp);
      t.discount.push_back(std::pow(gamma, tr.t_next - t0));
    }
    out.push_back(std::move(t));
  }
  return out;
}

namespace detail {

struct UnitValues {
  std::vector<double> values;   // per-trajectory estimator terms
  std::vector<double> weights;  // per-trajectory diagnostic weights
};

inline void check_ope_unit(const OpeTrajectory& t) {
  const std::size_t n = t.rewards.size();
  if (t.behavior.size() != n || t.target.size() != n || t.discount.size() != n)
    throw DataError("ope: ragged trajectory arrays");
  for (std::size_t k = 0; k < n; ++k)
    if (!(t.behavior[k] > 0.0))
      throw DataError("ope: non-positive behavior propensity");
}

template <class PerTrajectory>
UnitValues collect_units(std::span<const OpeTrajectory> trajs,
                         PerTrajectory&& fn) {
  if (trajs.empty()) throw DataError("ope: no trajectories");
  UnitValues u;
  u.values.reserve(trajs.size());
  u.weights.reserve(trajs.size());
  for (const OpeTrajectory& t : trajs) {
    check_ope_unit(t);
    auto [v, w] = fn(t);
    u.values.push_back(v);
    u.weights.push_back(w);
  }
  return u;
}

inline OpeEstimate finalize(EstimatorKind kind, UnitValues u,
                            bool self_normalized) {
  const std::size_t n = u.values.size();
  const double dn = static_cast<double>(n);
  double wsum = 0.0;
  for (double w : u.weights) wsum += w;
  if (self_normalized) {
    // Normalizes by the realized mean weight. Diagnostics only: the ratio
    // trades a little bias for variance and is invariant to propensity
    // miscalibration by a constant factor.
    if (wsum <= 0.0)
      throw NumericError("ope: self-normalization with zero total weight");
    for (double& v : u.values) v *= dn / wsum;
  }
  OpeEstimate e;
  e.kind = kind;
  e.self_normalized = self_normalized;
  e.n_units = n;
  double mean = 0.0;
  for (double v : u.values) mean += v;
  mean /= dn;
  e.value = mean;
  if (n > 1) {
    double ss = 0.0;
    for (double v : u.values) ss += (v - mean) * (v - mean);
    e.stderr_ = std::sqrt(ss / (dn - 1.0) / dn);
  }
  e.ess = effective_sample_size(u.weights);
  double wmax = 0.0, wmean = 0.0;
  for (double w : u.weights) {
    wmax = std::max(wmax, w);
    wmean += w;
  }
  wmean /= dn;
  double wvar = 0.0;
  for (double w : u.weights) wvar += (w - wmean) * (w - wmean);
  double top_share = 0.0;
  if (wsum > 0.0) {
    std::vector<double> sorted = u.weights;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    const std::size_t top = std::max<std::size_t>(1, n / 100);
    double top_sum = 0.0;
    for (std::size_t i = 0; i < top; ++i) top_sum += sorted[i];
    top_share = top_sum / wsum;
  }
  e.diagnostics = {wmax, wmean, n > 1 ? wvar / (dn - 1.0) : 0.0, top_share};
  return e;
}

}  // namespace detail

// Full-trajectory weight times discounted return. Unbiased under full
// support, highest variance of the three.
inline OpeEstimate trajectory_is(std::span<const OpeTrajectory> trajs,
                                 bool self_normalized = false) {
  return detail::finalize(
      EstimatorKind::TrajectoryIs,
      detail::collect_units(trajs,
                            [](const OpeTrajectory& t) {
                              double w = 1.0, g = 0.0;
                              for (std::size_t k = 0; k < t.rewards.size();
                                   ++k) {
                                w *= t.target[k] / t.behavior[k];
                                g += t.discount[k] * t.rewards[k];
                              }
                              return std::pair<double, double>{w * g, w};
                            }),
      self_normalized);
}

// Each reward is weighted only by the ratios up to and including its own
// step. Unbiased with lower variance than the full product.
inline OpeEstimate per_decision_is(std::span<const OpeTrajectory> trajs,
                                   bool self_normalized = false) {
  return detail::finalize(
      EstimatorKind::PerDecisionIs,
      detail::collect_units(trajs,
                            [](const OpeTrajectory& t) {
                              double w = 1.0, v = 0.0, wmean = 0.0;
                              for (std::size_t k = 0; k < t.rewards.size();
                                   ++k) {
                                w *= t.target[k] / t.behavior[k];
                                v += w * t.discount[k] * t.rewards[k];
                                wmean += w;
                              }
                              const std::size_t n = t.rewards.size();
                              return std::pair<double, double>{
                                  v, n ? wmean / static_cast<double>(n) : 1.0};
                            }),
      self_normalized);
}

// Single-step approximation: each reward keeps only its own step's ratio.
// Biased for multi-step returns but far lower variance; matches the other
// estimators exactly on horizon-1 data.
inline OpeEstimate one_step_is(std::span<const OpeTrajectory> trajs,
                               bool self_normalized = false) {
  return detail::finalize(
      EstimatorKind::OneStepIs,
      detail::collect_units(trajs,
                            [](const OpeTrajectory& t) {
                              double v = 0.0, wmean = 0.0;
                              for (std::size_t k = 0; k < t.rewards.size();
                                   ++k) {
                                const double r = t.target[k] / t.behavior[k];
                                v += r * t.discount[k] * t.rewards[k];
                                wmean += r;
                              }
                              const std::size_t n = t.rewards.size();
                              return std::pair<double, double>{
                                  v, n ? wmean / static_cast<double>(n) : 1.0};
                            }),
      self_normalized);
}

inline OpeEstimate run_estimator(EstimatorKind kind,
                                 std::span<const OpeTrajectory> trajs,
                                 bool self_normalized = false) {
  switch (kind) {
    case EstimatorKind::TrajectoryIs:
      return trajectory_is(trajs, self_normalized);
    case EstimatorKind::PerDecisionIs:
      return per_decision_is(trajs, self_normalized);
    default:
      return one_step_is(trajs, self_normalized);
  }
}

// OPE for each raw metric component plus the scalarized reward, all against
// the same smoothed evaluation policy. Volume is reported as a positive
// discounted send count so "more sends" reads as a larger number.
struct PolicyMetricEstimates {
  OpeEstimate sessions;
  OpeEstimate clicks;
  OpeEstimate volume;
  OpeEstimate scalarized;
};

inline PolicyMetricEstimates evaluate_policy_metrics(
    const Dataset& ds, const QPolicy& policy, const Smoothing& smoothing,
    const PreferenceVector& prefs, double gamma, EstimatorKind kind,
    bool self_normalized = false) {
  if (policy.feature_schema != ds.feature_schema)
    throw DataError("evaluate_policy_metrics: checkpoint schema does not "
                    "match dataset");
  std::vector<std::vector<double>> scal(ds.trajectories.size());
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    scal[i].resize(ds.trajectories[i].steps.size());
    for (std::size_t k = 0; k < scal[i].size(); ++k)
      scal[i][k] = scalarize(prefs, ds.trajectories[i].steps[k].reward);
  }
  auto target_prop = [&](const Transition& tr) {
    return policy_propensity(policy, tr.state, smoothing)
        [static_cast<std::size_t>(action_index(tr.action))];
  };
  std::vector<OpeTrajectory> base = make_ope_inputs(ds, scal, target_prop, gamma);

  auto with_component =
      [&](const std::function<double(const Transition&)>& comp) {
        std::vector<OpeTrajectory> v = base;
        for (std::size_t i = 0; i < ds.trajectories.size(); ++i)
          for (std::size_t k = 0; k < v[i].rewards.size(); ++k)
            v[i].rewards[k] = comp(ds.trajectories[i].steps[k]);
        return v;
      };

  PolicyMetricEstimates out;
  out.scalarized = run_estimator(kind, base, self_normalized);
  out.sessions = run_estimator(
      kind,
      with_component([](const Transition& t) {
        return static_cast<double>(t.reward.sessions);
      }),
      self_normalized);
  out.clicks = run_estimator(
      kind,
      with_component(
          [](const Transition& t) { return static_cast<double>(t.reward.click); }),
      self_normalized);
  out.volume = run_estimator(
      kind,
      with_component([](const Transition& t) {
        return t.action == Action::Send ? 1.0 : 0.0;
      }),
      self_normalized);
  return out;
}

}  // namespace notirl
