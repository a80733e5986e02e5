#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "notirl/errors.hpp"
#include "notirl/features.hpp"
#include "notirl/matrix.hpp"
#include "notirl/mdp.hpp"
#include "notirl/sim.hpp"

namespace notirl {

// Supervised stand-ins for immediate feedback: a logistic click model fitted
// on send impressions and per-action linear session models. Both store
// raw-feature-space coefficients so predictions do not depend on any
// particular standardization being applied first.

// Fitting iterates trajectories by ascending episode_id so the result is
// invariant to the order trajectories happen to be stored in.
inline std::vector<std::size_t> canonical_trajectory_order(const Dataset& ds) {
  std::vector<std::size_t> idx(ds.trajectories.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return ds.trajectories[a].episode_id < ds.trajectories[b].episode_id;
  });
  return idx;
}

struct ClickModel {
  std::vector<std::string> feature_schema;
  std::vector<double> weights;
  double intercept = 0.0;
};

// P(click | state, action): zero for NOT_SEND by definition.
inline double predict_click(const ClickModel& m, const StateFeatures& s,
                            Action a) {
  if (a == Action::NotSend) return 0.0;
  if (s.size() != m.weights.size())
    throw DataError("predict_click: feature dimension mismatch");
  double z = m.intercept;
  for (std::size_t j = 0; j < s.size(); ++j) z += m.weights[j] * s[j];
  return sigmoid(z);
}

struct LinearHead {
  std::vector<double> weights;
  double intercept = 0.0;
};

struct SessionModel {
  std::vector<std::string> feature_schema;
  std::array<LinearHead, kNumActions> heads;
};

// E[sessions in the next window | state, action], clamped at zero since the
// target is a count.
inline double predict_sessions(const SessionModel& m, const StateFeatures& s,
                               Action a) {
  const LinearHead& h = m.heads[static_cast<std::size_t>(action_index(a))];
  if (s.size() != h.weights.size())
    throw DataError("predict_sessions: feature dimension mismatch");
  double z = h.intercept;
  for (std::size_t j = 0; j < s.size(); ++j) z += h.weights[j] * s[j];
  return std::max(0.0, z);
}

struct FitOptions {
  std::size_t max_iters = 400;
  double grad_tol = 1e-10;
  double init_step = 1.0;
};

struct FitDiagnostics {
  std::size_t n_rows = 0;
  double final_loss = 0.0;
  std::size_t iters = 0;
};

namespace detail {

struct DesignRows {
  std::vector<StateFeatures> x;
  std::vector<double> y;
};

inline double logistic_loss_and_grad(const DesignRows& d,
                                     const std::vector<double>& w, double b,
                                     std::vector<double>* gw, double* gb) {
  const double n = static_cast<double>(d.x.size());
  double loss = 0.0;
  if (gw) std::fill(gw->begin(), gw->end(), 0.0);
  if (gb) *gb = 0.0;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    double z = b;
    for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * d.x[i][j];
    // log(1 + e^z) - y z, evaluated without overflow
    loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) -
            d.y[i] * z;
    if (gw) {
      const double p = sigmoid(z);
      const double r = p - d.y[i];
      for (std::size_t j = 0; j < w.size(); ++j) (*gw)[j] += r * d.x[i][j];
      *gb += r;
    }
  }
  if (gw)
    for (double& g : *gw) g /= n;
  if (gb) *gb /= n;
  return loss / n;
}

}  // namespace detail

// Full-batch gradient descent with Armijo backtracking on standardized
// features, so the recorded loss sequence is non-increasing by construction.
// Coefficients are mapped back to raw feature space before returning.
inline ClickModel fit_click_model(const Dataset& ds,
                                  const FitOptions& opts = {},
                                  FitDiagnostics* diag = nullptr) {
  detail::DesignRows rows;
  for (std::size_t idx : canonical_trajectory_order(ds))
    for (const Transition& tr : ds.trajectories[idx].steps)
      if (tr.action == Action::Send) {
        rows.x.push_back(tr.state);
        rows.y.push_back(static_cast<double>(tr.reward.click));
      }
  if (rows.x.empty())
    throw DataError("fit_click_model: dataset contains no send transitions");

  const FeatureTransform ft = FeatureTransform::fit(rows.x);
  for (StateFeatures& s : rows.x) s = ft(s);

  const std::size_t dim = ft.dim();
  std::vector<double> w(dim, 0.0), gw(dim, 0.0);
  double b = 0.0, gb = 0.0;
  double loss = detail::logistic_loss_and_grad(rows, w, b, &gw, &gb);
  double step = opts.init_step;
  std::size_t iters = 0;
  for (; iters < opts.max_iters; ++iters) {
    double gsq = gb * gb;
    for (double g : gw) gsq += g * g;
    if (gsq < opts.grad_tol * opts.grad_tol) break;
    bool accepted = false;
    while (step >= 1e-12) {
      std::vector<double> w2(dim);
      for (std::size_t j = 0; j < dim; ++j) w2[j] = w[j] - step * gw[j];
      const double b2 = b - step * gb;
      const double loss2 =
          detail::logistic_loss_and_grad(rows, w2, b2, nullptr, nullptr);
      if (loss2 <= loss - 1e-4 * step * gsq) {
        w = std::move(w2);
        b = b2;
        loss = detail::logistic_loss_and_grad(rows, w, b, &gw, &gb);
        step = std::min(step * 2.0, opts.init_step * 16.0);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }

  ClickModel m;
  m.feature_schema = ds.feature_schema;
  m.weights.assign(dim, 0.0);
  m.intercept = b;
  for (std::size_t j = 0; j < dim; ++j) {
    m.weights[j] = w[j] / ft.scale[j];
    m.intercept -= w[j] * ft.center[j] / ft.scale[j];
  }
  if (diag) {
    diag->n_rows = rows.x.size();
    diag->final_loss = loss;
    diag->iters = iters;
  }
  return m;
}

// Per-action least squares via normal equations on standardized features.
// Singular systems (constant columns and the like) fall back to a small
// ridge; exact full-rank data is solved exactly.
inline SessionModel fit_session_model(const Dataset& ds,
                                      FitDiagnostics* diag = nullptr) {
  SessionModel model;
  model.feature_schema = ds.feature_schema;
  std::size_t total_rows = 0;
  double total_sse = 0.0;
  for (std::size_t ai = 0; ai < kNumActions; ++ai) {
    const Action a = static_cast<Action>(ai);
    detail::DesignRows rows;
    for (std::size_t idx : canonical_trajectory_order(ds))
      for (const Transition& tr : ds.trajectories[idx].steps)
        if (tr.action == a) {
          rows.x.push_back(tr.state);
          rows.y.push_back(static_cast<double>(tr.reward.sessions));
        }
    if (rows.x.empty())
      throw DataError(std::string("fit_session_model: no '") + to_string(a) +
                      "' transitions in dataset");
    const FeatureTransform ft = FeatureTransform::fit(rows.x);
    const std::size_t dim = ft.dim();
    const std::size_t n = rows.x.size();

    DenseMatrix gram(dim + 1, dim + 1);
    std::vector<double> rhs(dim + 1, 0.0);
    std::vector<double> z(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      ft.apply(rows.x[i], z);
      gram.at(0, 0) += 1.0;
      rhs[0] += rows.y[i];
      for (std::size_t j = 0; j < dim; ++j) {
        gram.at(0, j + 1) += z[j];
        gram.at(j + 1, 0) += z[j];
        rhs[j + 1] += rows.y[i] * z[j];
        for (std::size_t k2 = 0; k2 <= j; ++k2) {
          gram.at(j + 1, k2 + 1) += z[j] * z[k2];
          gram.at(k2 + 1, j + 1) = gram.at(j + 1, k2 + 1);
        }
      }
    }

    std::vector<double> beta;
    try {
      beta = solve_linear_system(gram, rhs);
    } catch (const NumericError&) {
      for (std::size_t j = 0; j <= dim; ++j)
        gram.at(j, j) += 1e-8 * static_cast<double>(n);
      beta = solve_linear_system(gram, rhs);
    }

    LinearHead& head = model.heads[ai];
    head.weights.assign(dim, 0.0);
    head.intercept = beta[0];
    for (std::size_t j = 0; j < dim; ++j) {
      head.weights[j] = beta[j + 1] / ft.scale[j];
      head.intercept -= beta[j + 1] * ft.center[j] / ft.scale[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double pred = head.intercept;
      for (std::size_t j = 0; j < dim; ++j)
        pred += head.weights[j] * rows.x[i][j];
      const double r = rows.y[i] - pred;
      total_sse += r * r;
    }
    total_rows += n;
  }
  if (diag) {
    diag->n_rows = total_rows;
    diag->final_loss = total_sse / static_cast<double>(total_rows);
    diag->iters = 1;
  }
  return model;
}

// How scalar training rewards are assembled from raw components. Predicted
// substitutions replace the observed click / session counts with model
// expectations; volume is always observed.
struct RewardSpec {
  PreferenceVector preferences;
  bool use_predicted_clicks = false;
  bool use_predicted_sessions = false;
  std::optional<ClickModel> click_model;
  std::optional<SessionModel> session_model;
};

inline void validate(const RewardSpec& spec,
                     const std::vector<std::string>& schema) {
  const PreferenceVector& w = spec.preferences;
  if (w.sessions == 0.0 && w.clicks == 0.0 && w.volume == 0.0)
    throw ConfigError("reward spec: at least one preference weight must be "
                      "nonzero");
  if (!std::isfinite(w.sessions) || !std::isfinite(w.clicks) ||
      !std::isfinite(w.volume))
    throw ConfigError("reward spec: non-finite preference weight");
  if (spec.use_predicted_clicks && !spec.click_model)
    throw ConfigError("reward spec: predicted clicks requested without a "
                      "click model");
  if (spec.use_predicted_sessions && !spec.session_model)
    throw ConfigError("reward spec: predicted sessions requested without a "
                      "session model");
  if (spec.click_model && spec.click_model->feature_schema != schema)
    throw DataError("reward spec: click model schema does not match dataset");
  if (spec.session_model && spec.session_model->feature_schema != schema)
    throw DataError("reward spec: session model schema does not match "
                    "dataset");
}

// Scalar reward per step, aligned with ds.trajectories.
inline std::vector<std::vector<double>> build_scalar_rewards(
    const Dataset& ds, const RewardSpec& spec) {
  validate(spec, ds.feature_schema);
  std::vector<std::vector<double>> out;
  out.reserve(ds.trajectories.size());
  for (const Trajectory& traj : ds.trajectories) {
    std::vector<double> r(traj.steps.size(), 0.0);
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
      const Transition& tr = traj.steps[k];
      const double sessions =
          spec.use_predicted_sessions
              ? predict_sessions(*spec.session_model, tr.state, tr.action)
              : static_cast<double>(tr.reward.sessions);
      const double clicks =
          spec.use_predicted_clicks
              ? predict_click(*spec.click_model, tr.state, tr.action)
              : static_cast<double>(tr.reward.click);
      r[k] = spec.preferences.sessions * sessions +
             spec.preferences.clicks * clicks +
             spec.preferences.volume * static_cast<double>(tr.reward.volume);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace notirl
