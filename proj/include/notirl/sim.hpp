#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "notirl/errors.hpp"
#include "notirl/mdp.hpp"
#include "notirl/rng.hpp"
#include "notirl/version.hpp"

namespace notirl {

// Ground-truth notification world. Each user owns a latent visit process,
// click response and a fatigue state that sends inflate and time decays.
// Policies only ever see the feature vector, never the latents, so the
// simulator doubles as the "online" yardstick offline estimates are judged
// against.

inline constexpr double kSessionGapMinutes = 30.0;
inline constexpr double kFeatureWindowHours = 168.0;

struct UserModel {
  double base_visit_rate = 1.5;     // organic visits per day
  double click_affinity = -1.0;     // logit offset for click response
  double notification_boost = 0.8;  // transient visit-rate lift per send
  double disable_threshold = 3.0;   // fatigue level where response collapses
  double profile_activity = 1.5;    // observable proxy of base_visit_rate
  double profile_affinity = -1.0;   // observable proxy of click_affinity
};

struct PopulationConfig {
  double visit_rate_mean = 1.5;
  double visit_rate_log_sigma = 0.5;
  double affinity_mean = -1.0;
  double affinity_sigma = 0.8;
  double boost_mean = 0.8;
  double boost_log_sigma = 0.4;
  double disable_mean = 3.0;
  double disable_log_sigma = 0.3;
  double profile_noise_sigma = 0.25;
};

struct DynamicsConfig {
  double fatigue_per_send = 1.0;
  double fatigue_half_life_hours = 48.0;
  double click_fatigue_coeff = 0.35;
  double click_disable_coeff = 1.5;
  double visit_fatigue_coeff = 0.08;
  double visit_disable_coeff = 0.6;
  double boost_half_life_hours = 6.0;
  double click_visit_delay_hours = 0.05;
  bool click_opens_session = true;
  double noise_visit_rate_per_day = 0.2;
  double quality_mean = 0.0;
  double quality_sigma = 1.0;
};

// Hand-tuned send heuristic standing in for the production ranker: send when
// the expected immediate payoff (session lift plus weighted click chance)
// clears a threshold.
struct BaselineConfig {
  double beta = 1.0;
  double lambda = 0.65;
  double session_lift_scale = 0.3;
};

struct SimConfig {
  std::size_t n_users = 500;
  double horizon_days = 7.0;
  double candidate_rate_per_day = 3.0;
  double epsilon = 0.25;  // exploration mixed into the logging policy
  std::uint64_t seed = 1;
  PopulationConfig population;
  DynamicsConfig dynamics;
  BaselineConfig baseline;
};

inline void validate(const SimConfig& c) {
  auto bad = [](const std::string& f) {
    throw ConfigError("sim config: invalid " + f);
  };
  // n_users = 0 is allowed: it yields a valid, empty dataset.
  if (!(c.horizon_days > 0.0)) bad("horizon_days");
  if (!(c.candidate_rate_per_day >= 0.0)) bad("candidate_rate_per_day");
  if (!(c.epsilon > 0.0) || c.epsilon > 1.0) bad("epsilon (need (0, 1])");
  if (!(c.population.visit_rate_mean >= 0.0)) bad("population.visit_rate_mean");
  if (!(c.population.visit_rate_log_sigma >= 0.0))
    bad("population.visit_rate_log_sigma");
  if (!(c.population.affinity_sigma >= 0.0)) bad("population.affinity_sigma");
  if (!(c.population.boost_mean >= 0.0)) bad("population.boost_mean");
  if (!(c.population.boost_log_sigma >= 0.0)) bad("population.boost_log_sigma");
  if (!(c.population.disable_mean > 0.0)) bad("population.disable_mean");
  if (!(c.population.disable_log_sigma >= 0.0))
    bad("population.disable_log_sigma");
  if (!(c.population.profile_noise_sigma >= 0.0))
    bad("population.profile_noise_sigma");
  if (!(c.dynamics.fatigue_per_send >= 0.0)) bad("dynamics.fatigue_per_send");
  if (!(c.dynamics.fatigue_half_life_hours > 0.0))
    bad("dynamics.fatigue_half_life_hours");
  if (!(c.dynamics.boost_half_life_hours > 0.0))
    bad("dynamics.boost_half_life_hours");
  if (!(c.dynamics.click_fatigue_coeff >= 0.0) ||
      !(c.dynamics.click_disable_coeff >= 0.0) ||
      !(c.dynamics.visit_fatigue_coeff >= 0.0) ||
      !(c.dynamics.visit_disable_coeff >= 0.0))
    bad("dynamics fatigue coefficients (need >= 0)");
  if (!(c.dynamics.click_visit_delay_hours >= 0.0))
    bad("dynamics.click_visit_delay_hours");
  if (!(c.dynamics.noise_visit_rate_per_day >= 0.0))
    bad("dynamics.noise_visit_rate_per_day");
  if (!(c.dynamics.quality_sigma >= 0.0)) bad("dynamics.quality_sigma");
}

inline const std::vector<std::string>& default_feature_schema() {
  static const std::vector<std::string> schema = {
      "badge_count",     "hours_since_last_visit",
      "sends_past_day",  "sends_past_week",
      "candidate_quality", "profile_activity",
      "profile_affinity"};
  return schema;
}

using ActionDist = std::array<double, kNumActions>;
using PolicyFn = std::function<ActionDist(const StateFeatures&)>;

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Probability the logging policy assigns to `queried` when the deterministic
// base policy picked `base`.
inline double epsilon_greedy_propensity(Action base, Action queried,
                                        double epsilon) {
  if (!(epsilon >= 0.0) || epsilon > 1.0)
    throw ConfigError("epsilon_greedy_propensity: epsilon outside [0, 1]");
  const double uniform_share = epsilon / static_cast<double>(kNumActions);
  return (base == queried ? 1.0 - epsilon : 0.0) + uniform_share;
}

inline Action moo_baseline_decide(double session_lift, double click_prob,
                                  double beta, double lambda) {
  return session_lift + beta * click_prob > lambda ? Action::Send
                                                   : Action::NotSend;
}

inline std::size_t feature_index(const std::vector<std::string>& schema,
                                 const std::string& name) {
  for (std::size_t i = 0; i < schema.size(); ++i)
    if (schema[i] == name) return i;
  throw ConfigError("feature schema is missing '" + name + "'");
}

inline PolicyFn moo_baseline_policy(const BaselineConfig& cfg,
                                    const std::vector<std::string>& schema) {
  const std::size_t q_idx = feature_index(schema, "candidate_quality");
  return [cfg, q_idx](const StateFeatures& s) -> ActionDist {
    const double p_click = sigmoid(s.at(q_idx));
    const double lift = cfg.session_lift_scale * p_click;
    const Action a = moo_baseline_decide(lift, p_click, cfg.beta, cfg.lambda);
    ActionDist d{0.0, 0.0};
    d[static_cast<std::size_t>(action_index(a))] = 1.0;
    return d;
  };
}

// Wraps a (near) deterministic policy with epsilon exploration. Ties in the
// base distribution resolve to NOT_SEND.
inline PolicyFn epsilon_greedy_policy(PolicyFn base, double epsilon) {
  if (!(epsilon >= 0.0) || epsilon > 1.0)
    throw ConfigError("epsilon_greedy_policy: epsilon outside [0, 1]");
  return [base = std::move(base), epsilon](const StateFeatures& s) {
    const ActionDist b = base(s);
    const Action pick = b[1] > b[0] ? Action::Send : Action::NotSend;
    ActionDist d;
    d[0] = epsilon_greedy_propensity(pick, Action::NotSend, epsilon);
    d[1] = epsilon_greedy_propensity(pick, Action::Send, epsilon);
    return d;
  };
}

// Latent click response. Monotone non-increasing in fatigue; the disable
// coefficient only bites past the user's threshold.
inline double click_probability(const UserModel& u, double quality,
                                double fatigue, const DynamicsConfig& dyn) {
  const double excess = std::max(0.0, fatigue - u.disable_threshold);
  return sigmoid(quality + u.click_affinity - dyn.click_fatigue_coeff * fatigue -
                 dyn.click_disable_coeff * excess);
}

// Multiplier in (0, 1] applied to the organic visit rate.
inline double visit_suppression(const UserModel& u, double fatigue,
                                const DynamicsConfig& dyn) {
  const double excess = std::max(0.0, fatigue - u.disable_threshold);
  return std::exp(-dyn.visit_fatigue_coeff * fatigue -
                  dyn.visit_disable_coeff * excess);
}

// Population draw. Lognormal fields are mean-parameterized, so expectations
// match the configured means and zero sigmas reproduce them exactly.
inline UserModel sample_user(const SimConfig& config, Rng& rng) {
  const PopulationConfig& pop = config.population;
  auto lognormal = [&](double mean, double log_sigma) {
    const double z = rng.normal();
    return mean * std::exp(log_sigma * z - 0.5 * log_sigma * log_sigma);
  };
  UserModel u;
  u.base_visit_rate = lognormal(pop.visit_rate_mean, pop.visit_rate_log_sigma);
  u.click_affinity = pop.affinity_mean + pop.affinity_sigma * rng.normal();
  u.notification_boost = lognormal(pop.boost_mean, pop.boost_log_sigma);
  u.disable_threshold = lognormal(pop.disable_mean, pop.disable_log_sigma);
  u.profile_activity = u.base_visit_rate + pop.profile_noise_sigma * rng.normal();
  u.profile_affinity = u.click_affinity + pop.profile_noise_sigma * rng.normal();
  return u;
}

struct EventLog {
  std::uint64_t user_id = 0;
  std::vector<double> visits;  // hours, ascending
  struct SendEvent {
    double t = 0.0;
    std::size_t decision = 0;
  };
  struct ClickEvent {
    double t = 0.0;
    std::size_t decision = 0;  // index of the send the click belongs to
  };
  std::vector<SendEvent> sends;
  std::vector<ClickEvent> clicks;
};

namespace detail {

// Mutable per-episode state threaded through the event walk.
struct EpisodeState {
  const UserModel* user = nullptr;
  const DynamicsConfig* dyn = nullptr;
  double last_visit = 0.0;
  int badge = 0;
  double fatigue_value = 0.0;
  double fatigue_time = 0.0;
  std::vector<double> send_times;
  std::vector<double> pending_visits;  // scheduled click-opened visits

  double fatigue_at(double t) const {
    const double dt = t - fatigue_time;
    return fatigue_value * std::exp2(-dt / dyn->fatigue_half_life_hours);
  }

  void add_send(double t) {
    fatigue_value = fatigue_at(t) + dyn->fatigue_per_send;
    fatigue_time = t;
    send_times.push_back(t);
    badge += 1;
  }

  double boost_sum(double t) const {
    double s = 0.0;
    for (double ts : send_times)
      s += std::exp2(-(t - ts) / dyn->boost_half_life_hours);
    return s;
  }

  // Organic plus background visit intensity at time t (per hour).
  double visit_rate(double t) const {
    const double organic = (user->base_visit_rate / 24.0) *
                           (1.0 + user->notification_boost * boost_sum(t)) *
                           visit_suppression(*user, fatigue_at(t), *dyn);
    return organic + dyn->noise_visit_rate_per_day / 24.0;
  }

  void record_visit(double t, EventLog& log, int& count) {
    last_visit = t;
    badge = 0;
    log.visits.push_back(t);
    ++count;
  }

  // Thinned Poisson walk over (a, b]; the bound is the rate at the window
  // start, valid because boost only decays between decisions and suppression
  // never exceeds one. Scheduled click visits are spliced in at their exact
  // times. Returns the number of visits in the span.
  int simulate_visits(double a, double b, EventLog& log, Rng& rng) {
    int count = 0;
    double cursor = a;
    while (true) {
      double stop = b;
      bool has_pending = false;
      if (!pending_visits.empty() && pending_visits.front() <= b) {
        stop = pending_visits.front();
        has_pending = true;
      }
      const double lam_max = visit_rate(cursor);
      if (lam_max > 0.0) {
        double t = cursor;
        while (true) {
          t += rng.exponential(lam_max);
          if (t > stop) break;
          if (rng.uniform01() < visit_rate(t) / lam_max)
            record_visit(t, log, count);
        }
      }
      if (!has_pending) break;
      record_visit(stop, log, count);
      pending_visits.erase(pending_visits.begin());
      cursor = stop;
    }
    return count;
  }
};

}  // namespace detail

// Runs one user episode under `policy`, which must return a proper action
// distribution. Produces the logged trajectory (decision steps with raw
// reward components and propensities) plus the raw event log the trajectory
// was condensed from. Episodes without any candidate arrival return an empty
// trajectory.
inline std::pair<Trajectory, EventLog> simulate_episode(
    const UserModel& user, const PolicyFn& policy, const SimConfig& config,
    std::uint64_t episode_id, Rng& rng) {
  const double horizon = config.horizon_days * 24.0;
  const DynamicsConfig& dyn = config.dynamics;

  std::vector<double> arrivals;
  if (config.candidate_rate_per_day > 0.0) {
    const double rate = config.candidate_rate_per_day / 24.0;
    double t = 0.0;
    while (true) {
      t += rng.exponential(rate);
      if (t >= horizon) break;
      arrivals.push_back(t);
    }
  }

  EventLog log;
  log.user_id = episode_id;
  Trajectory traj;
  traj.episode_id = episode_id;
  traj.user_id = episode_id;

  detail::EpisodeState st;
  st.user = &user;
  st.dyn = &dyn;
  {
    // Steady-state-ish recency at episode start, bounded by the feature
    // window so degenerate rates stay finite.
    const double rate0 =
        std::max((user.base_visit_rate + dyn.noise_visit_rate_per_day) / 24.0,
                 1e-6);
    st.last_visit = -std::min(rng.exponential(rate0), kFeatureWindowHours);
  }

  auto features_at = [&](double t, double quality) {
    const auto& sends = st.send_times;
    auto count_since = [&](double lo) {
      return static_cast<double>(std::count_if(
          sends.begin(), sends.end(), [&](double ts) { return ts >= lo; }));
    };
    StateFeatures f(7, 0.0);
    f[0] = static_cast<double>(st.badge);
    f[1] = std::min(t - st.last_visit, kFeatureWindowHours);
    f[2] = count_since(t - 24.0);
    f[3] = count_since(t - kFeatureWindowHours);
    f[4] = quality;
    f[5] = user.profile_activity;
    f[6] = user.profile_affinity;
    return f;
  };

  if (arrivals.empty()) {
    st.simulate_visits(0.0, horizon, log, rng);
    return {std::move(traj), std::move(log)};
  }

  st.simulate_visits(0.0, arrivals.front(), log, rng);
  for (std::size_t k = 0; k < arrivals.size(); ++k) {
    const double t_k = arrivals[k];
    const double t_next = k + 1 < arrivals.size() ? arrivals[k + 1] : horizon;
    const double quality = rng.normal(dyn.quality_mean, dyn.quality_sigma);
    const StateFeatures state = features_at(t_k, quality);
    if (!traj.steps.empty()) traj.steps.back().next_state = state;

    const ActionDist dist = policy(state);
    if (!(dist[0] >= 0.0) || !(dist[1] >= 0.0) ||
        std::abs(dist[0] + dist[1] - 1.0) > 1e-9)
      throw NumericError("simulate_episode: policy returned an improper "
                         "action distribution");
    const Action action =
        rng.uniform01() < dist[0] ? Action::NotSend : Action::Send;

    Transition tr;
    tr.episode_id = episode_id;
    tr.t_k = t_k;
    tr.t_next = t_next;
    tr.state = state;
    tr.action = action;
    tr.behavior_propensity = dist[static_cast<std::size_t>(action_index(action))];
    tr.terminal = k + 1 == arrivals.size();

    if (action == Action::Send) {
      st.add_send(t_k);
      log.sends.push_back({t_k, k});
      const double p_click =
          click_probability(user, quality, st.fatigue_at(t_k), dyn);
      if (rng.bernoulli(p_click)) {
        tr.reward.click = 1;
        const double t_click = t_k + dyn.click_visit_delay_hours;
        log.clicks.push_back({std::min(t_click, horizon), k});
        if (dyn.click_opens_session && t_click <= horizon)
          st.pending_visits.push_back(t_click);
      }
      tr.reward.volume = -1;
    }

    tr.reward.sessions = st.simulate_visits(t_k, t_next, log, rng);
    traj.steps.push_back(std::move(tr));
  }
  traj.steps.back().next_state = traj.steps.back().state;
  return {std::move(traj), std::move(log)};
}

// Logged-data generation under the epsilon-greedy MOO baseline (or any
// supplied base policy). Per-user substreams keep every episode reproducible
// independent of generation order.
inline Dataset generate_dataset(const SimConfig& config,
                                const PolicyFn& base_policy,
                                std::vector<EventLog>* logs_out = nullptr) {
  validate(config);
  const PolicyFn behavior = epsilon_greedy_policy(base_policy, config.epsilon);
  Dataset ds;
  ds.feature_schema = default_feature_schema();
  ds.provenance.seed = config.seed;
  ds.provenance.behavior_policy = "epsilon_greedy_moo_baseline";
  ds.provenance.tool_version = std::string(kVersion);
  for (std::uint64_t u = 0; u < config.n_users; ++u) {
    Rng rng = substream(config.seed, "episode", u);
    const UserModel user = sample_user(config, rng);
    auto [traj, log] = simulate_episode(user, behavior, config, u, rng);
    if (!traj.steps.empty()) ds.trajectories.push_back(std::move(traj));
    if (logs_out) logs_out->push_back(std::move(log));
  }
  return ds;
}

inline Dataset generate_dataset(const SimConfig& config,
                                std::vector<EventLog>* logs_out = nullptr) {
  return generate_dataset(
      config, moo_baseline_policy(config.baseline, default_feature_schema()),
      logs_out);
}

// Counts sessions with the zero-activity gap rule: a new session starts when
// consecutive timestamps are `gap` or more apart. Timestamps and gap share
// whatever unit the caller picks.
inline int session_count(std::span<const double> timestamps, double gap) {
  if (timestamps.empty()) return 0;
  int sessions = 1;
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] < timestamps[i - 1])
      throw DataError("session_count: timestamps must be sorted");
    if (timestamps[i] - timestamps[i - 1] >= gap) ++sessions;
  }
  return sessions;
}

struct MetricsPeriod {
  double start_hours = 0.0;
  double end_hours = 0.0;
};

struct Metrics {
  long long sessions = 0;
  long long active_users = 0;  // users with at least one session in period
  long long volume = 0;
  double ctr = 0.0;  // mean over user-days with at least one send
  bool ctr_defined = false;
};

inline Metrics compute_metrics(std::span<const EventLog> logs,
                               const MetricsPeriod& period) {
  if (!(period.end_hours >= period.start_hours))
    throw ConfigError("compute_metrics: empty period");
  Metrics m;
  double ctr_sum = 0.0;
  std::size_t ctr_days = 0;
  for (const EventLog& log : logs) {
    std::vector<double> minutes;
    for (double v : log.visits)
      if (v >= period.start_hours && v <= period.end_hours)
        minutes.push_back(v * 60.0);
    const int sessions = session_count(minutes, kSessionGapMinutes);
    m.sessions += sessions;
    if (sessions > 0) m.active_users += 1;

    // Clicks attribute to the day their notification was sent.
    std::vector<std::pair<long long, std::size_t>> day_sends;  // (day, sends)
    auto day_of = [&](double t) {
      return static_cast<long long>(
          std::floor((t - period.start_hours) / 24.0));
    };
    std::vector<long long> send_day_by_decision;
    for (const EventLog::SendEvent& s : log.sends) {
      if (s.t < period.start_hours || s.t > period.end_hours) continue;
      m.volume += 1;
      const long long d = day_of(s.t);
      if (s.decision >= send_day_by_decision.size())
        send_day_by_decision.resize(s.decision + 1, -1);
      send_day_by_decision[s.decision] = d;
      auto it = std::find_if(day_sends.begin(), day_sends.end(),
                             [&](const auto& p) { return p.first == d; });
      if (it == day_sends.end())
        day_sends.push_back({d, 1});
      else
        it->second += 1;
    }
    std::vector<std::pair<long long, std::size_t>> day_clicks;
    for (const EventLog::ClickEvent& c : log.clicks) {
      if (c.decision >= send_day_by_decision.size()) continue;
      const long long d = send_day_by_decision[c.decision];
      if (d < 0) continue;
      auto it = std::find_if(day_clicks.begin(), day_clicks.end(),
                             [&](const auto& p) { return p.first == d; });
      if (it == day_clicks.end())
        day_clicks.push_back({d, 1});
      else
        it->second += 1;
    }
    for (const auto& [day, sends] : day_sends) {
      std::size_t clicks = 0;
      for (const auto& [cday, c] : day_clicks)
        if (cday == day) clicks = c;
      ctr_sum += static_cast<double>(clicks) / static_cast<double>(sends);
      ++ctr_days;
    }
  }
  if (ctr_days > 0) {
    m.ctr = ctr_sum / static_cast<double>(ctr_days);
    m.ctr_defined = true;
  }
  return m;
}

// Monte Carlo ground truth for a policy: discounted scalarized return plus
// per-component discounted returns and plain per-episode metric averages.
struct PolicyValue {
  std::size_t n_episodes = 0;
  double scalarized = 0.0;
  double scalarized_stderr = 0.0;
  double sessions_return = 0.0;
  double sessions_return_stderr = 0.0;
  double clicks_return = 0.0;
  double clicks_return_stderr = 0.0;
  double volume_return = 0.0;  // discounted send count (positive)
  double volume_return_stderr = 0.0;
  double sessions_mean = 0.0;
  double volume_mean = 0.0;
  double active_fraction = 0.0;
  double ctr = 0.0;
  bool ctr_defined = false;
};

inline PolicyValue true_policy_value(const PolicyFn& policy,
                                     const SimConfig& config,
                                     std::size_t n_episodes, double gamma,
                                     const PreferenceVector& prefs,
                                     std::uint64_t seed) {
  validate(config);
  if (n_episodes == 0)
    throw ConfigError("true_policy_value: n_episodes must be > 0");
  const double horizon = config.horizon_days * 24.0;

  std::vector<double> scal, sess_r, click_r, vol_r;
  scal.reserve(n_episodes);
  std::vector<EventLog> logs;
  logs.reserve(n_episodes);
  for (std::uint64_t e = 0; e < n_episodes; ++e) {
    Rng rng = substream(seed, "truth", e);
    const UserModel user = sample_user(config, rng);
    auto [traj, log] = simulate_episode(user, policy, config, e, rng);
    const std::size_t n = traj.steps.size();
    std::vector<double> r_scal(n), r_sess(n), r_click(n), r_vol(n);
    for (std::size_t k = 0; k < n; ++k) {
      const Transition& s = traj.steps[k];
      r_scal[k] = scalarize(prefs, s.reward);
      r_sess[k] = s.reward.sessions;
      r_click[k] = s.reward.click;
      r_vol[k] = s.action == Action::Send ? 1.0 : 0.0;
    }
    scal.push_back(discounted_return(traj, gamma, r_scal));
    sess_r.push_back(discounted_return(traj, gamma, r_sess));
    click_r.push_back(discounted_return(traj, gamma, r_click));
    vol_r.push_back(discounted_return(traj, gamma, r_vol));
    logs.push_back(std::move(log));
  }

  auto mean_stderr = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    if (v.size() < 2) return std::pair<double, double>{mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair<double, double>{mean, std::sqrt(ss / (n - 1.0) / n)};
  };

  PolicyValue out;
  out.n_episodes = n_episodes;
  std::tie(out.scalarized, out.scalarized_stderr) = mean_stderr(scal);
  std::tie(out.sessions_return, out.sessions_return_stderr) =
      mean_stderr(sess_r);
  std::tie(out.clicks_return, out.clicks_return_stderr) = mean_stderr(click_r);
  std::tie(out.volume_return, out.volume_return_stderr) = mean_stderr(vol_r);

  const Metrics m = compute_metrics(logs, {0.0, horizon});
  const double n = static_cast<double>(n_episodes);
  out.sessions_mean = static_cast<double>(m.sessions) / n;
  out.volume_mean = static_cast<double>(m.volume) / n;
  out.active_fraction = static_cast<double>(m.active_users) / n;
  out.ctr = m.ctr;
  out.ctr_defined = m.ctr_defined;
  return out;
}

}  // namespace notirl
