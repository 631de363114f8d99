#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "irlobs/estimator.hpp"
#include "irlobs/experiment/config.hpp"
#include "irlobs/irl.hpp"
#include "irlobs/plant.hpp"
#include "irlobs/purge.hpp"

namespace irlobs::experiment {

/// One row of the optional per-step gate trace.
struct StepTrace {
  double t = 0.0;
  bool varpi = false;
  double kappa_gram = 0.0;  // before the policy ran
  double eta = 0.0;
  double eta_bar = 0.0;  // before the policy ran
  bool stack_full = false;
  bool weights_changed = false;
  bool purged = false;
  double sigma_u1_norm = 0.0;  // after data selection, before the policy
  std::size_t stack_size = 0;  // after the step
};

struct PurgeEvent {
  double t = 0.0;
  double error_before = 0.0;  // relative W error when the stack was emptied
  double error_after = std::numeric_limits<double>::quiet_NaN();  // at the next solve
};

struct RunReport {
  std::vector<double> t;
  std::vector<Vector> p_tilde;
  std::vector<Vector> q_tilde;
  std::vector<Vector> theta_tilde;
  std::vector<Vector> w_tilde;

  std::size_t steps = 0;
  std::size_t queries = 0;
  std::size_t purges = 0;
  std::size_t weight_updates = 0;
  std::vector<PurgeEvent> purge_events;
  std::vector<StepTrace> trace;

  irl::WeightVector W_final;
  irl::WeightVector W_true;
  estimator::ThetaVector theta_final{1, 1};
  estimator::ThetaVector theta_true{1, 1};
  double final_kappa = std::numeric_limits<double>::infinity();  // kappa(Sigma^T Sigma)
  double final_residual = 0.0;       // ||Sigma W + Sigma_u1|| on the final stack
  double estimator_lambda_min = 0.0;  // of the parameter stack information matrix
  double gamma_eig_min = std::numeric_limits<double>::infinity();
  double gamma_eig_max = 0.0;
  std::uint64_t trajectory_digest = 0;  // FNV-1a over the demonstrator states
  double wall_clock_seconds = 0.0;
  std::string failure;  // non-empty if a module error aborted the run

  double w_relative_error() const {
    const double ref = W_true.stacked().norm();
    return ref > 0.0 ? (W_true.stacked() - W_final.stacked()).norm() / ref : 0.0;
  }
};

struct RunOptions {
  bool trace = false;
};

namespace detail {

inline void fnv1a(std::uint64_t& h, const Vector& v) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(v.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
}

/// Sum of incommensurate sinusoids per input channel, amplitude-normalized.
inline Vector probing_signal(double t, Eigen::Index m, double amplitude) {
  static constexpr double freqs[] = {0.7, 1.9, 3.1, 4.7, 6.3};
  Vector d = Vector::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double stretch = 1.0 + 0.37 * static_cast<double>(i);
    for (std::size_t j = 0; j < std::size(freqs); ++j) {
      const double phase = 0.9 * static_cast<double>(j) + 1.3 * static_cast<double>(i);
      d(i) += std::sin(freqs[j] * stretch * t + phase);
    }
  }
  return amplitude * d / std::sqrt(static_cast<double>(std::size(freqs)));
}

}  // namespace detail

inline plant::Demonstrator make_demonstrator(const ExperimentConfig& cfg) {
  plant::LinearPlant p(cfg.A, cfg.B);
  plant::CostFunction cost(cfg.basis_named(cfg.q_basis, "cost.Q_basis"), cfg.q_weights, cfg.r_diag);
  return plant::make_demonstrator(std::move(p), std::move(cost));
}

/// Parameter history stack recorded from a separate, persistently excited
/// run of the same plant (measured p and u only).
inline estimator::ParamHistoryStack prerecorded_stack(const ExperimentConfig& cfg,
                                                      const plant::Demonstrator& d) {
  const Eigen::Index n = cfg.n();
  const Eigen::Index m = cfg.m();
  estimator::ParamHistoryStack stack(cfg.estimator.stack_capacity, estimator::ThetaVector::length(n, m),
                                     cfg.estimator.g_lower);
  const double amp = cfg.explore_amplitude;
  const plant::Trajectory traj = plant::simulate_plant(
      d.plant, cfg.x0, cfg.explore_duration, cfg.dt, [&](double t, const Vector& x) -> Vector {
        return plant::optimal_action(d, x) + detail::probing_signal(t, m, amp);
      });
  const plant::MeasuredLogs logs = plant::measured_logs(traj, n);
  const auto every = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.estimator.record_interval / cfg.dt)));
  estimator::fill_stack_from_logs(stack, logs.position, logs.input, cfg.estimator.gains.T1,
                                  cfg.estimator.gains.T2, every);
  return stack;
}

/// Demonstrator -> estimator -> IRL -> purge on a common clock.
inline RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  const auto wall_start = std::chrono::steady_clock::now();
  cfg.validate();
  RunReport rep;
  const Eigen::Index n = cfg.n();
  const Eigen::Index m = cfg.m();
  const double dt = cfg.dt;
  const plant::Demonstrator demo = make_demonstrator(cfg);
  const irl::FeatureBasis basis = cfg.feature_basis();
  const purge::QualityConfig qc = cfg.quality();
  const double r1 = cfg.r1();

  rep.W_true = irl::true_weights(demo, basis);
  rep.theta_true = estimator::ThetaVector::from_plant(demo.plant);
  const double w_norm = rep.W_true.stacked().norm();

  estimator::ParamHistoryStack pstack =
      cfg.stack_source == StackSource::prerecorded
          ? prerecorded_stack(cfg, demo)
          : estimator::ParamHistoryStack(cfg.estimator.stack_capacity, estimator::ThetaVector::length(n, m),
                                         cfg.estimator.g_lower);

  Vector x = cfg.x0;
  Vector u = plant::optimal_action(demo, x);
  estimator::Estimator est(dt, cfg.estimator, std::move(pstack), x.head(n), u, cfg.initial_theta());

  irl::IrlHistoryStack irl_stack(cfg.N, basis.width(), 1 + m);
  purge::PurgeState ps;
  ps.kappa1_bar = cfg.kappa1;
  ps.kappa2_bar = cfg.kappa2;
  ps.W_current = irl::WeightVector::zeros(basis, r1);
  ps.require_full_stack = cfg.require_full_stack;
  rep.W_final = ps.W_current;
  rep.theta_final = est.state().theta_hat;

  const double horizon = qc.T + static_cast<double>(qc.half_width + 2) * dt;
  numerics::SampledSignal p_log(dt, n, horizon);
  numerics::SampledSignal u_log(dt, m, horizon);
  numerics::SampledSignal qhat_log(dt, n, horizon);
  const double eta_start = qc.T + static_cast<double>(qc.half_width) * dt;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> box(cfg.query_low, cfg.query_high);

  const std::size_t steps = plant::step_count(cfg.duration, dt);
  const std::size_t report_every =
      cfg.full_rate ? 1 : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.report_interval / dt)));
  auto log_sample = [&](std::size_t k) {
    const auto& obs = est.state();
    rep.t.push_back(static_cast<double>(k) * dt);
    rep.p_tilde.push_back(x.head(n) - obs.p_hat);
    rep.q_tilde.push_back(x.tail(n) - obs.q_hat);
    rep.theta_tilde.push_back(rep.theta_true.values() - obs.theta_hat.values());
    rep.w_tilde.push_back(rep.W_true.stacked() - ps.W_current.stacked());
  };
  auto track_gamma = [&] {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(est.state().Gamma, Eigen::EigenvaluesOnly);
    rep.gamma_eig_min = std::min(rep.gamma_eig_min, eig.eigenvalues().minCoeff());
    rep.gamma_eig_max = std::max(rep.gamma_eig_max, eig.eigenvalues().maxCoeff());
  };

  std::uint64_t digest = 0xcbf29ce484222325ULL;
  detail::fnv1a(digest, x);
  if (steps > 0) {
    p_log.push(x.head(n));
    u_log.push(u);
    qhat_log.push(est.state().q_hat);
    track_gamma();
    log_sample(0);
  }

  auto closed_loop = [&](double, const Vector& xs) { return demo.plant.dynamics(xs, plant::optimal_action(demo, xs)); };
  std::optional<std::size_t> awaiting_post_purge;

  try {
    for (std::size_t k = 1; k <= steps; ++k) {
      const double t = static_cast<double>(k) * dt;
      x = numerics::rk4_step(closed_loop, t - dt, x, dt);
      u = plant::optimal_action(demo, x);
      detail::fnv1a(digest, x);
      est.step(x.head(n), u);
      const auto& obs = est.state();
      p_log.push(x.head(n));
      u_log.push(u);
      qhat_log.push(obs.q_hat);
      track_gamma();

      double eta = std::numeric_limits<double>::infinity();
      if (t >= eta_start - 1e-9 * dt) {
        const double t_past = t - qc.T;
        const Vector v_bar = purge::smooth_velocity(p_log, t_past, qc.half_width);
        const Vector& q_past = qhat_log.at_index(qhat_log.index_of(t_past));
        eta = purge::quality_eta1(obs.p_tilde, q_past, v_bar, qc.S1) +
              purge::quality_eta2(p_log, u_log, obs.theta_hat, t, qc.T, qc.S2, qc.half_width);
      }

      bool varpi = false;
      if (cfg.mode == Mode::query) {
        Vector x_star(2 * n);
        for (Eigen::Index i = 0; i < x_star.size(); ++i) x_star(i) = box(rng);
        const Vector u_star = plant::query(demo, x_star);
        ++rep.queries;
        varpi |= irl::data_select(irl_stack, irl::make_row_block(basis, x_star, u_star, obs.theta_hat, r1), eta,
                                  t, cfg.selection);
      }
      varpi |= irl::data_select(irl_stack, irl::make_row_block(basis, obs.x_hat(), u, obs.theta_hat, r1), eta, t,
                                cfg.selection);

      ps.varpi = varpi;
      StepTrace tr;
      if (opts.trace) {
        tr.t = t;
        tr.varpi = varpi;
        tr.kappa_gram = irl_stack.kappa_gram();
        tr.eta = eta;
        tr.eta_bar = irl_stack.min_quality();
        tr.stack_full = irl_stack.full();
        tr.sigma_u1_norm = irl_stack.sigma_u1_norm();
      }
      const Vector w_before = ps.W_current.stacked();
      const purge::PurgeOutcome out = purge::purge_policy(ps, irl_stack, eta, basis, cfg.selection.xi2);
      const double err = w_norm > 0.0 ? (rep.W_true.stacked() - ps.W_current.stacked()).norm() / w_norm : 0.0;
      if (out.weights_updated) {
        ++rep.weight_updates;
        if (awaiting_post_purge) {
          rep.purge_events[*awaiting_post_purge].error_after = err;
          awaiting_post_purge.reset();
        }
      }
      if (out.purged) {
        rep.purge_events.push_back({t, err});
        awaiting_post_purge = rep.purge_events.size() - 1;
      }
      if (opts.trace) {
        tr.weights_changed = (ps.W_current.stacked() - w_before).cwiseAbs().maxCoeff() > 0.0;
        tr.purged = out.purged;
        tr.stack_size = irl_stack.size();
        rep.trace.push_back(tr);
      }
      rep.steps = k;
      if (k % report_every == 0) log_sample(k);
    }
  } catch (const Error& e) {
    rep.failure = e.what();
  }

  rep.purges = ps.s;
  rep.W_final = ps.W_current;
  rep.theta_final = est.state().theta_hat;
  rep.final_kappa = irl_stack.kappa_gram();
  rep.final_residual = irl::regression_residual(irl_stack, ps.W_current);
  rep.estimator_lambda_min = est.stack().lambda_min();
  rep.trajectory_digest = digest;
  rep.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return rep;
}

}  // namespace irlobs::experiment
