#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <unsupported/Eigen/MatrixFunctions>

#include "irlobs/numerics.hpp"
#include "irlobs/plant.hpp"

namespace irlobs::estimator {

/// theta = [vec(A1); vec(A2); vec(B)], column-major vectorization.
class ThetaVector {
 public:
  ThetaVector(Eigen::Index n, Eigen::Index m) : n_(n), m_(m), values_(Vector::Zero(length(n, m))) {}

  ThetaVector(Eigen::Index n, Eigen::Index m, Vector values) : n_(n), m_(m), values_(std::move(values)) {
    numerics::require_dims(values_.size() == length(n, m), "ThetaVector: length must be 2n^2 + mn");
  }

  static Eigen::Index length(Eigen::Index n, Eigen::Index m) { return 2 * n * n + m * n; }

  static ThetaVector from_matrices(const Matrix& A1, const Matrix& A2, const Matrix& B) {
    const Eigen::Index n = A1.rows();
    numerics::require_dims(A1.cols() == n && A2.rows() == n && A2.cols() == n && B.rows() == n,
                           "ThetaVector::from_matrices: block sizes");
    Vector v(length(n, B.cols()));
    v << numerics::vec(A1), numerics::vec(A2), numerics::vec(B);
    return {n, B.cols(), std::move(v)};
  }

  static ThetaVector from_plant(const plant::LinearPlant& p) {
    return from_matrices(p.A1(), p.A2(), p.B());
  }

  Eigen::Index n() const noexcept { return n_; }
  Eigen::Index m() const noexcept { return m_; }
  Eigen::Index size() const noexcept { return values_.size(); }
  const Vector& values() const noexcept { return values_; }
  Vector& values() noexcept { return values_; }

  Matrix A1() const { return block(0, n_); }
  Matrix A2() const { return block(n_ * n_, n_); }
  Matrix B() const { return block(2 * n_ * n_, m_); }
  Matrix A() const {
    Matrix A(n_, 2 * n_);
    A << A1(), A2();
    return A;
  }
  Matrix a_prime() const { return plant::LinearPlant::assemble_a_prime(A()); }
  Matrix b_prime() const { return plant::LinearPlant::assemble_b_prime(B()); }

 private:
  Matrix block(Eigen::Index offset, Eigen::Index cols) const {
    return Eigen::Map<const Matrix>(values_.data() + offset, n_, cols);
  }

  Eigen::Index n_;
  Eigen::Index m_;
  Vector values_;
};

struct EstimatorGains {
  double k_theta = 0.3 / 150.0;
  double beta1 = 5.0;
  double alpha = 20.0;
  double beta = 10.0;
  double k = 100.0;
  double T1 = 1.0;
  double T2 = 0.8;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(name, "must be positive and finite");
    };
    positive(k_theta, "k_theta");
    positive(beta1, "beta1");
    positive(alpha, "alpha");
    positive(beta, "beta");
    positive(k, "k");
    positive(T1, "T1");
    positive(T2, "T2");
  }
};

namespace detail {

inline Eigen::Index grid_steps(double span, double dt, const char* field) {
  const double s = span / dt;
  const double r = std::round(s);
  if (std::abs(s - r) > 1e-6 * std::max(1.0, s) || r < 1.0) {
    throw ConfigError(field, "must be a positive multiple of dt");
  }
  return static_cast<Eigen::Index>(r);
}

inline Matrix assemble_script_G(const Vector& F, const Vector& G, const Vector& U, Eigen::Index n) {
  const Eigen::Index m = U.size();
  Matrix out(n, ThetaVector::length(n, m));
  out << numerics::kron_identity_transpose(F, n), numerics::kron_identity_transpose(G, n),
      numerics::kron_identity_transpose(U, n);
  return out;
}

inline bool before_start(double t, double T1, double T2) {
  return t < T1 + T2 - 1e-9 * std::max(1.0, T1 + T2);
}

inline void require_retention(const numerics::SampledSignal& log, double T1, double T2) {
  if (log.window() < T1 + T2 - 1e-12) {
    throw ConfigError("estimator.T1/T2", "signal retention is shorter than T1 + T2");
  }
}

/// Inner integral of the nested operator, sampled on the sigma grid, then
/// integrated by the trapezoid rule in sigma.
inline Vector nested_integral(const numerics::SampledSignal& s, double t, double T1, double T2) {
  const Eigen::Index k2 = grid_steps(T2, s.dt(), "estimator.T2");
  const double h = T2 / static_cast<double>(k2);
  Vector acc = Vector::Zero(s.dim());
  Vector prev;
  for (Eigen::Index j = 0; j <= k2; ++j) {
    const double sigma = t - T2 + static_cast<double>(j) * h;
    Vector inner = s.trapezoid(sigma - T1, sigma);
    if (j > 0) acc += 0.5 * h * (prev + inner);
    prev = std::move(inner);
  }
  return acc;
}

}  // namespace detail

/// p(t-T2-T1) - p(t-T1) + p(t) - p(t-T2) for t >= T1 + T2, zero before.
inline Vector script_F(const numerics::SampledSignal& p_log, double t, double T1, double T2) {
  detail::require_retention(p_log, T1, T2);
  if (detail::before_start(t, T1, T2)) return Vector::Zero(p_log.dim());
  return p_log.at(t - T2 - T1) - p_log.at(t - T1) + p_log.at(t) - p_log.at(t - T2);
}

/// Regressor of the integral error system: [(F ⊗ I)^T, (G ⊗ I)^T, (U ⊗ I)^T]
/// with F = I p, G = J p(t) - J p(t - T1), U = I u; zero before T1 + T2.
inline Matrix script_G(const numerics::SampledSignal& p_log, const numerics::SampledSignal& u_log,
                       double t, double T1, double T2) {
  detail::require_retention(p_log, T1, T2);
  detail::require_retention(u_log, T1, T2);
  const Eigen::Index n = p_log.dim();
  const Eigen::Index m = u_log.dim();
  if (detail::before_start(t, T1, T2)) return Matrix::Zero(n, ThetaVector::length(n, m));
  const Vector F = detail::nested_integral(p_log, t, T1, T2);
  const Vector G = p_log.trapezoid(t - T2, t) - p_log.trapezoid(t - T1 - T2, t - T1);
  const Vector U = detail::nested_integral(u_log, t, T1, T2);
  return detail::assemble_script_G(F, G, U, n);
}

/// Streaming evaluation of (script_F, script_G) on the sample grid using
/// running cumulative integrals; O(n + m) work per sample.
class IntegralErrorSystem {
 public:
  IntegralErrorSystem(Eigen::Index n, Eigen::Index m, double dt, double T1, double T2)
      : n_(n), m_(m), dt_(dt),
        k1_(static_cast<std::size_t>(detail::grid_steps(T1, dt, "estimator.T1"))),
        k2_(static_cast<std::size_t>(detail::grid_steps(T2, dt, "estimator.T2"))),
        p_(dt, n, T1 + T2), cp_(dt, n, T1 + T2), cu_(dt, m, T1 + T2), dp_(dt, n, T2), du_(dt, m, T2),
        jp_prev_(Vector::Zero(n)), ju_prev_(Vector::Zero(m)) {}

  void push(const Vector& p, const Vector& u) {
    numerics::require_dims(p.size() == n_ && u.size() == m_, "IntegralErrorSystem::push: dimension");
    const std::size_t k = p_.count();
    if (k == 0) {
      cp_.push(Vector::Zero(n_));
      cu_.push(Vector::Zero(m_));
    } else {
      cp_.push(cp_.back() + 0.5 * dt_ * (p_.back() + p));
      cu_.push(cu_.back() + 0.5 * dt_ * (u_prev_ + u));
    }
    p_.push(p);
    u_prev_ = u;
    // J1(t) = integral of the signal over [t - T1, t]; D = running integral of J1 from T1.
    if (k < k1_) {
      dp_.push(Vector::Zero(n_));
      du_.push(Vector::Zero(m_));
    } else {
      const Vector jp = cp_.at_index(k) - cp_.at_index(k - k1_);
      const Vector ju = cu_.at_index(k) - cu_.at_index(k - k1_);
      if (k == k1_) {
        dp_.push(Vector::Zero(n_));
        du_.push(Vector::Zero(m_));
      } else {
        dp_.push(dp_.back() + 0.5 * dt_ * (jp_prev_ + jp));
        du_.push(du_.back() + 0.5 * dt_ * (ju_prev_ + ju));
      }
      jp_prev_ = jp;
      ju_prev_ = ju;
    }
  }

  std::size_t count() const noexcept { return p_.count(); }
  double time() const noexcept { return count() == 0 ? 0.0 : p_.back_time(); }
  bool ready() const noexcept { return count() > k1_ + k2_; }

  Vector script_F() const {
    if (!ready()) return Vector::Zero(n_);
    const std::size_t k = count() - 1;
    return p_.at_index(k - k1_ - k2_) - p_.at_index(k - k1_) + p_.at_index(k) - p_.at_index(k - k2_);
  }

  Matrix script_G() const {
    if (!ready()) return Matrix::Zero(n_, ThetaVector::length(n_, m_));
    const std::size_t k = count() - 1;
    const Vector F = dp_.at_index(k) - dp_.at_index(k - k2_);
    const Vector G = cp_.at_index(k) - cp_.at_index(k - k2_) - cp_.at_index(k - k1_) +
                     cp_.at_index(k - k1_ - k2_);
    const Vector U = du_.at_index(k) - du_.at_index(k - k2_);
    return detail::assemble_script_G(F, G, U, n_);
  }

 private:
  Eigen::Index n_;
  Eigen::Index m_;
  double dt_;
  std::size_t k1_;
  std::size_t k2_;
  numerics::SampledSignal p_;
  numerics::SampledSignal cp_;
  numerics::SampledSignal cu_;
  numerics::SampledSignal dp_;
  numerics::SampledSignal du_;
  Vector u_prev_;
  Vector jp_prev_;
  Vector ju_prev_;
};

/// Recorded pairs (F_i, G_i) with F_i = G_i theta, plus the cached
/// information matrix sum G_i^T G_i and its smallest eigenvalue.
class ParamHistoryStack {
 public:
  struct Entry {
    Vector F;
    Matrix G;
  };

  ParamHistoryStack(std::size_t capacity, Eigen::Index theta_dim, double g_lower)
      : capacity_(capacity), g_lower_(g_lower),
        info_(Matrix::Zero(theta_dim, theta_dim)), moment_(Vector::Zero(theta_dim)) {
    if (capacity == 0) throw ConfigError("estimator.M", "history stack capacity must be positive");
    if (!(g_lower > 0.0)) throw ConfigError("estimator.g_lower", "must be positive");
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool full() const noexcept { return entries_.size() == capacity_; }
  double g_lower() const noexcept { return g_lower_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  /// sum G_i^T G_i
  const Matrix& information() const noexcept { return info_; }
  /// sum G_i^T F_i
  const Vector& moment() const noexcept { return moment_; }
  double lambda_min() const noexcept { return lambda_min_; }
  bool full_rank() const noexcept { return lambda_min_ > g_lower_; }

  /// Appends until capacity; afterwards swaps in the pair only if some
  /// substitution raises lambda_min of the information matrix. Returns
  /// whether the stack changed.
  bool maybe_record(const Vector& F, const Matrix& G) {
    numerics::require_dims(G.cols() == info_.cols() && G.rows() == F.size(),
                           "ParamHistoryStack::maybe_record: dimension");
    numerics::require_finite(F, "ParamHistoryStack: F");
    numerics::require_finite(G, "ParamHistoryStack: G");
    const Matrix gram = G.transpose() * G;
    if (!full()) {
      entries_.push_back({F, G});
      info_ += gram;
      moment_ += G.transpose() * F;
      refresh_lambda();
      return true;
    }
    double best = lambda_min_;
    std::size_t best_i = entries_.size();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const Matrix& Gi = entries_[i].G;
      const double lm = numerics::min_eigenvalue(info_ - Gi.transpose() * Gi + gram);
      if (lm > best) {
        best = lm;
        best_i = i;
      }
    }
    if (best_i == entries_.size()) return false;
    entries_[best_i] = {F, G};
    recompute();
    return true;
  }

 private:
  void recompute() {
    info_.setZero();
    moment_.setZero();
    for (const auto& e : entries_) {
      info_ += e.G.transpose() * e.G;
      moment_ += e.G.transpose() * e.F;
    }
    refresh_lambda();
  }

  void refresh_lambda() { lambda_min_ = numerics::min_eigenvalue(info_); }

  std::size_t capacity_;
  double g_lower_;
  std::vector<Entry> entries_;
  Matrix info_;
  Vector moment_;
  double lambda_min_ = 0.0;
};

/// Observer and adaptation state. The velocity-free form keeps q_hat as an
/// algebraic function of running integrals of measured signals, so the
/// true velocity never enters.
///
/// The filtered error r = q~ + alpha p~ + eta of the p-filter design is
/// never formed: the integral form of the eta filter eliminates it.
struct ObserverState {
  double time = 0.0;
  Vector p_hat;
  Vector q_hat;
  Vector eta;
  Vector nu;
  Vector p_tilde;
  ThetaVector theta_hat;
  Matrix Gamma;
  Vector theta_hat_rate;

  // Running integrals (trapezoid on the sample grid).
  Vector nu_integral;        // int nu
  Vector eta_integral;       // int (beta + k) eta + k alpha p~
  Vector measured_integral;  // int B^ u + (A1^ - dA2^/dt) p
  Vector measured_integrand;
  Vector velocity_offset;    // q^(0) - A2^(0) p(0)
  Vector velocity_base;      // q^ minus int nu, at the current sample
  Vector p_meas;
  Vector previous_velocity_base;
  Vector previous_p_meas;
  bool has_previous = false;

  static ObserverState initial(const Vector& p0, const Vector& u0, ThetaVector theta0,
                               const Matrix& gamma0, const Vector& q_hat0) {
    const Eigen::Index n = p0.size();
    numerics::require_dims(theta0.n() == n && theta0.m() == u0.size(),
                           "ObserverState::initial: theta dimensions");
    numerics::require_dims(gamma0.rows() == theta0.size() && gamma0.cols() == theta0.size(),
                           "ObserverState::initial: Gamma must be (2n^2+mn)-square");
    numerics::require_dims(q_hat0.size() == n, "ObserverState::initial: q_hat0 dimension");
    if (Eigen::LLT<Matrix>(gamma0).info() != Eigen::Success) {
      throw DomainError("ObserverState::initial: Gamma(0) must be positive definite");
    }
    ObserverState s{
        .time = 0.0,
        .p_hat = p0,
        .q_hat = q_hat0,
        .eta = Vector::Zero(n),
        .nu = Vector::Zero(n),
        .p_tilde = Vector::Zero(n),
        .theta_hat = std::move(theta0),
        .Gamma = gamma0,
        .theta_hat_rate = Vector::Zero(gamma0.rows()),
        .nu_integral = Vector::Zero(n),
        .eta_integral = Vector::Zero(n),
        .measured_integral = Vector::Zero(n),
        .measured_integrand = Vector::Zero(n),
        .velocity_offset = Vector::Zero(n),
        .velocity_base = Vector::Zero(n),
        .p_meas = p0,
        .previous_velocity_base = Vector::Zero(n),
        .previous_p_meas = p0,
        .has_previous = false,
    };
    const Matrix A2 = s.theta_hat.A2();
    s.velocity_offset = q_hat0 - A2 * p0;
    s.measured_integrand = s.theta_hat.B() * u0 + s.theta_hat.A1() * p0;
    s.velocity_base = s.velocity_offset + A2 * p0;
    return s;
  }

  Vector x_hat() const {
    Vector x(2 * p_hat.size());
    x << p_hat, q_hat;
    return x;
  }
};

namespace detail {

struct AdaptationRates {
  Vector theta_dot;
  Matrix gamma_dot;
};

inline AdaptationRates adaptation_rates(const Vector& theta, const Matrix& Gamma,
                                        const ParamHistoryStack& stack, const EstimatorGains& g) {
  const Vector residual = stack.moment() - stack.information() * theta;
  return {g.k_theta * Gamma * residual,
          g.beta1 * Gamma - g.k_theta * Gamma * stack.information() * Gamma};
}

}  // namespace detail

/// One RK4 step of the concurrent-learning law and the least-squares gain
/// dynamics. Both are held while the stack is not full rank.
inline void update_theta(ObserverState& obs, const ParamHistoryStack& stack, const EstimatorGains& gains,
                         double dt) {
  if (!stack.full_rank()) {
    obs.theta_hat_rate.setZero();
    return;
  }
  const Eigen::Index d = obs.theta_hat.size();
  auto pack = [d](const Vector& th, const Matrix& G) {
    Vector z(d + d * d);
    z << th, numerics::vec(G);
    return z;
  };
  auto field = [&](double, const Vector& z) {
    const Vector th = z.head(d);
    const Matrix G = Eigen::Map<const Matrix>(z.data() + d, d, d);
    const auto r = detail::adaptation_rates(th, G, stack, gains);
    return pack(r.theta_dot, r.gamma_dot);
  };
  const Vector z = numerics::rk4_step(field, obs.time, pack(obs.theta_hat.values(), obs.Gamma), dt);
  obs.theta_hat.values() = z.head(d);
  Matrix G = Eigen::Map<const Matrix>(z.data() + d, d, d);
  obs.Gamma = 0.5 * (G + G.transpose());
  if (Eigen::LLT<Matrix>(obs.Gamma).info() != Eigen::Success) {
    throw NumericOverflow("update_theta: Gamma lost positive definiteness (dt too large?)");
  }
  obs.theta_hat_rate = detail::adaptation_rates(obs.theta_hat.values(), obs.Gamma, stack, gains).theta_dot;
}

namespace detail {

/// Exact one-step map of sdot = M s + e(tau) where, on [0, h], the forcing
/// is the polynomial c0 + c1 (tau/h) + c2 (tau/h)^2:
/// s+ = Phi s + G0 c0 + G1 c1 + G2 c2. Read off the exponential of the
/// augmented generator acting on [s; e; e'; e''].
struct FilterStep {
  Eigen::Matrix3d Phi;
  Eigen::Matrix3d G0;
  Eigen::Matrix3d G1;
  Eigen::Matrix3d G2;
};

inline FilterStep filter_step(const Eigen::Matrix3d& M, double dt) {
  using Mat12 = Eigen::Matrix<double, 12, 12>;
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  Mat12 F = Mat12::Zero();
  F.block<3, 3>(0, 0) = M * dt;
  F.block<3, 3>(0, 3) = dt * I;
  F.block<3, 3>(3, 6) = I;
  F.block<3, 3>(6, 9) = 2.0 * I;
  const Mat12 E = F.exp();
  return {E.block<3, 3>(0, 0), E.block<3, 3>(0, 3), E.block<3, 3>(0, 6), E.block<3, 3>(0, 9)};
}

}  // namespace detail

/// Advances the velocity-free observer by one sample.
///
/// Internal states (p_hat, int nu, int[(beta+k) eta + k alpha p~]) evolve
/// linearly given the measured position and the measured-signal integrals.
/// Those inputs are interpolated by the quadratic through the previous,
/// current and new samples (linear on the first step, which dominates the
/// discretization error) and the linear system is propagated exactly. Call update_theta first so theta_hat and its rate
/// refer to the new sample.
inline void observer_step(ObserverState& obs, const Vector& p_meas, const Vector& u,
                          const EstimatorGains& g, double dt) {
  const Eigen::Index n = obs.p_hat.size();
  numerics::require_dims(p_meas.size() == n && u.size() == obs.theta_hat.m(),
                         "observer_step: measurement dimension");
  if (!(dt > 0.0)) throw DomainError("observer_step: dt must be positive");
  const double c2 = g.k + g.alpha;
  const double c3 = g.k + g.alpha + g.beta;
  const double a = 1.0 + c3 * c2;
  const double bk = g.beta + g.k;
  const double e1 = bk * c2 - g.k * g.alpha;

  Eigen::Matrix3d M;
  M << 0.0, 1.0, 0.0,  //
      -a, 0.0, c3,     //
      e1, 0.0, -bk;
  thread_local Eigen::Matrix3d cached_M = Eigen::Matrix3d::Zero();
  thread_local double cached_dt = 0.0;
  thread_local detail::FilterStep step;
  if (M != cached_M || dt != cached_dt) {
    step = detail::filter_step(M, dt);
    cached_M = M;
    cached_dt = dt;
  }

  // Measured-signal integral and the algebraic velocity part at t + dt.
  const Matrix A2 = obs.theta_hat.A2();
  const Matrix A2_rate = Eigen::Map<const Matrix>(obs.theta_hat_rate.data() + n * n, n, n);
  const Vector integrand = obs.theta_hat.B() * u + (obs.theta_hat.A1() - A2_rate) * p_meas;
  const Vector measured = obs.measured_integral + 0.5 * dt * (obs.measured_integrand + integrand);
  const Vector base = obs.velocity_offset + measured + A2 * p_meas;

  using Block = Eigen::Matrix<double, 3, Eigen::Dynamic>;
  auto forcing = [&](const Vector& c, const Vector& p) {
    Block e(3, n);
    e.row(0) = c.transpose();
    e.row(1) = a * p.transpose();
    e.row(2) = -e1 * p.transpose();
    return e;
  };
  Block s(3, n);
  s.row(0) = obs.p_hat.transpose();
  s.row(1) = obs.nu_integral.transpose();
  s.row(2) = obs.eta_integral.transpose();
  const Block e_cur = forcing(obs.velocity_base, obs.p_meas);
  const Block e_next = forcing(base, p_meas);
  Block next = step.Phi * s + step.G0 * e_cur;
  if (obs.has_previous) {
    const Block e_prev = forcing(obs.previous_velocity_base, obs.previous_p_meas);
    next += step.G1 * (0.5 * (e_next - e_prev)) + step.G2 * (0.5 * (e_next - 2.0 * e_cur + e_prev));
  } else {
    next += step.G1 * (e_next - e_cur);
  }
  obs.previous_velocity_base = obs.velocity_base;
  obs.previous_p_meas = obs.p_meas;
  obs.has_previous = true;

  obs.p_hat = next.row(0).transpose();
  obs.nu_integral = next.row(1).transpose();
  obs.eta_integral = next.row(2).transpose();
  obs.p_tilde = p_meas - obs.p_hat;
  obs.eta = -obs.eta_integral - c2 * obs.p_tilde;
  obs.nu = obs.p_tilde - c3 * obs.eta;
  obs.q_hat = base + obs.nu_integral;
  obs.measured_integral = measured;
  obs.measured_integrand = integrand;
  obs.velocity_base = base;
  obs.p_meas = p_meas;
  obs.time += dt;

  if (!obs.p_hat.allFinite() || !obs.q_hat.allFinite() || !obs.eta.allFinite()) {
    throw NumericOverflow("observer_step: non-finite observer state");
  }
}

/// Feeds measured logs through the streaming error system, offering a pair
/// to the stack every `record_every` samples once t >= T1 + T2.
inline void fill_stack_from_logs(ParamHistoryStack& stack, const numerics::SampledSignal& p_log,
                                 const numerics::SampledSignal& u_log, double T1, double T2,
                                 std::size_t record_every) {
  numerics::require_dims(p_log.count() == u_log.count(), "fill_stack_from_logs: log lengths differ");
  if (record_every == 0) record_every = 1;
  IntegralErrorSystem sys(p_log.dim(), u_log.dim(), p_log.dt(), T1, T2);
  for (std::size_t k = p_log.first_index(); k < p_log.count(); ++k) {
    sys.push(p_log.at_index(k), u_log.at_index(k));
    if (sys.ready() && k % record_every == 0) stack.maybe_record(sys.script_F(), sys.script_G());
  }
}

struct EstimatorSettings {
  EstimatorGains gains;
  std::size_t stack_capacity = 150;
  double g_lower = 1e-6;
  double record_interval = 0.05;
  double gamma0 = 0.1;
};

/// Simultaneous state and parameter estimator driven by position and input
/// samples only.
class Estimator {
 public:
  Estimator(double dt, const EstimatorSettings& settings, ParamHistoryStack stack, const Vector& p0,
            const Vector& u0, ThetaVector theta0)
      : dt_(dt), settings_(settings), stack_(std::move(stack)),
        errors_(p0.size(), u0.size(), dt, settings.gains.T1, settings.gains.T2),
        obs_(ObserverState::initial(
            p0, u0, std::move(theta0),
            settings.gamma0 * Matrix::Identity(ThetaVector::length(p0.size(), u0.size()),
                                               ThetaVector::length(p0.size(), u0.size())),
            Vector::Zero(p0.size()))) {
    settings_.gains.validate();
    if (!(settings.gamma0 > 0.0)) throw ConfigError("estimator.gamma0", "must be positive");
    record_every_ = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(settings.record_interval / dt)));
    errors_.push(p0, u0);
  }

  void step(const Vector& p, const Vector& u) {
    errors_.push(p, u);
    ++sample_;
    if (errors_.ready() && sample_ % record_every_ == 0) {
      stack_.maybe_record(errors_.script_F(), errors_.script_G());
    }
    update_theta(obs_, stack_, settings_.gains, dt_);
    observer_step(obs_, p, u, settings_.gains, dt_);
  }

  const ObserverState& state() const noexcept { return obs_; }
  const ParamHistoryStack& stack() const noexcept { return stack_; }
  const IntegralErrorSystem& error_system() const noexcept { return errors_; }
  double time() const noexcept { return obs_.time; }

 private:
  double dt_;
  EstimatorSettings settings_;
  ParamHistoryStack stack_;
  IntegralErrorSystem errors_;
  ObserverState obs_;
  std::size_t sample_ = 0;
  std::size_t record_every_ = 1;
};

}  // namespace irlobs::estimator
