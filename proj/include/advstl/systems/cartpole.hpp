#pragma once

/*!
  \file cartpole.hpp
  \brief Cart-pole with adversarial track friction and a moving target.

  State (x, x_dot, theta, theta_dot, x_target). The defender pushes the cart
  with force f; the attacker picks the friction coefficient mu and the target
  velocity eps_dot, which is integrated into x_target.

    x_dd     = (f - mu x_dot + m_p l theta_dot^2 sin(theta) - m_p g cos(theta) sin(theta))
               / (m_c + m_p sin(theta)^2)
    theta_dd = (g sin(theta) - cos(theta) x_dd) / l

  theta = 0 is the upright position and l is half the pole length.
*/

#include <advstl/sim.hpp>
#include <advstl/stl.hpp>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace advstl::systems {

struct CartPoleParams {
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_length = 0.5;
  double gravity = 9.81;
  double dt = 0.05;
  sim::Integrator integrator = sim::Integrator::semi_implicit;

  double force_max = 30.0;
  double friction_min = 0.0;
  double friction_max = 1.0;
  double target_rate_max = 5.0;

  double x_limit = 30.0;
  double x_dot_limit = 10.0;
  double theta_limit = 1.5;

  // Requirement thresholds.
  double dist_min = -1.5;
  double dist_max = 1.5;
  double theta_min = -0.785;
  double theta_max = 0.785;
  double alpha = 0.4;

  /// Observe (x - x_target, x_dot, theta, theta_dot) instead of the full state.
  bool relative_observation = false;

  void validate() const {
    if (!(cart_mass > 0 && pole_mass > 0 && half_length > 0 && gravity > 0))
      throw std::invalid_argument("cart-pole masses, length and gravity must be positive");
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
    if (!(force_max >= 0 && friction_min <= friction_max && target_rate_max >= 0))
      throw std::invalid_argument("cart-pole action bounds are inconsistent");
    if (!(dist_min < dist_max && theta_min < theta_max))
      throw std::invalid_argument("cart-pole requirement bounds must satisfy min < max");
    if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("alpha must lie in [0, 1]");
  }
};

/// Accelerations (x_dd, theta_dd) at state s under force f and friction mu.
template <class T>
std::pair<T, T> cartpole_accelerations(const CartPoleParams& p, const T& x_dot, const T& theta, const T& theta_dot,
                                       const T& force, const T& mu) {
  const T sin_t = ad::sin(theta);
  const T cos_t = ad::cos(theta);
  const T num = force - mu * x_dot + theta_dot * theta_dot * sin_t * (p.pole_mass * p.half_length) -
                cos_t * sin_t * (p.pole_mass * p.gravity);
  const T den = sin_t * sin_t * p.pole_mass + p.cart_mass;
  const T x_dd = num / den;
  const T theta_dd = (sin_t * p.gravity - cos_t * x_dd) / p.half_length;
  return {x_dd, theta_dd};
}

class CartPole final : public sim::ModelBase<CartPole> {
 public:
  enum : std::size_t { X, X_DOT, THETA, THETA_DOT, X_TARGET };
  enum : std::size_t { M_DIST = 5 };  // monitored: state components then d = |x - x_target|

  explicit CartPole(CartPoleParams p = {}) : p_(p) {
    p_.validate();
    agent_ = sim::ActionSpace({"force"}, {-p_.force_max}, {p_.force_max});
    env_ = sim::ActionSpace({"friction", "target_rate"}, {p_.friction_min, -p_.target_rate_max},
                            {p_.friction_max, p_.target_rate_max});
  }

  const CartPoleParams& params() const { return p_; }

  std::string name() const override { return "cartpole"; }
  double dt() const override { return p_.dt; }
  std::vector<std::string> state_names() const override { return {"x", "x_dot", "theta", "theta_dot", "x_target"}; }
  std::vector<std::string> monitored_names() const override {
    return {"x", "x_dot", "theta", "theta_dot", "x_target", "d"};
  }
  const sim::ActionSpace& agent_actions() const override { return agent_; }
  const sim::ActionSpace& env_actions() const override { return env_; }
  std::size_t agent_obs_dim() const override { return p_.relative_observation ? 4 : 5; }
  std::size_t env_obs_dim() const override { return p_.relative_observation ? 4 : 5; }
  std::size_t noise_dim() const override { return 3; }

  std::vector<std::string> initial_variables() const override { return {"x", "x_dot", "theta", "theta_dot"}; }
  /// The target starts at the cart.
  std::vector<double> make_initial_state(std::span<const double> v) const override {
    if (v.size() != 4) throw std::invalid_argument("cart-pole initial state needs x, x_dot, theta, theta_dot");
    return {v[0], v[1], v[2], v[3], v[0]};
  }

  std::vector<std::pair<double, double>> state_limits() const override {
    const double inf = std::numeric_limits<double>::infinity();
    return {{-p_.x_limit, p_.x_limit},
            {-p_.x_dot_limit, p_.x_dot_limit},
            {-p_.theta_limit, p_.theta_limit},
            {-inf, inf},
            {-inf, inf}};
  }

  template <class T>
  std::vector<T> psi_impl(std::span<const T> s, std::span<const T> ua, std::span<const T> ue, double) const {
    if (s.size() != 5 || ua.size() != 1 || ue.size() != 2) throw std::invalid_argument("cart-pole input sizes");
    const auto [x_dd, th_dd] = cartpole_accelerations<T>(p_, s[X_DOT], s[THETA], s[THETA_DOT], ua[0], ue[0]);
    const double dt = p_.dt;
    if (p_.integrator == sim::Integrator::explicit_euler) {
      return {s[X_DOT] * dt, x_dd * dt, s[THETA_DOT] * dt, th_dd * dt, ue[1] * dt};
    }
    // Semi-implicit: velocities first, positions from the new velocities.
    const T dv = x_dd * dt;
    const T dw = th_dd * dt;
    return {(s[X_DOT] + dv) * dt, dv, (s[THETA_DOT] + dw) * dt, dw, ue[1] * dt};
  }

  template <class T>
  std::vector<T> observe_agent_impl(std::span<const T> s) const {
    return observe(s);
  }
  template <class T>
  std::vector<T> observe_env_impl(std::span<const T> s) const {
    return observe(s);
  }
  template <class T>
  std::vector<T> monitored_impl(std::span<const T> s) const {
    std::vector<T> m(s.begin(), s.end());
    m.push_back(ad::abs(s[X] - s[X_TARGET]));
    return m;
  }

 private:
  template <class T>
  std::vector<T> observe(std::span<const T> s) const {
    if (p_.relative_observation) return {s[X] - s[X_TARGET], s[X_DOT], s[THETA], s[THETA_DOT]};
    return {s.begin(), s.end()};
  }

  CartPoleParams p_;
  sim::ActionSpace agent_;
  sim::ActionSpace env_;
};

/// phi_d = G[0,h-1](d_min <= d <= d_max), phi_theta = G[0,h-1](theta_min <= theta <= theta_max),
/// weighted (alpha, 1 - alpha).
inline stl::RequirementSet cartpole_requirements(const CartPoleParams& p, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be positive");
  p.validate();
  using namespace stl;
  return RequirementSet({{"phi_d", globally(0, window - 1, box(CartPole::M_DIST, p.dist_min, p.dist_max, "d")),
                          p.alpha},
                         {"phi_theta",
                          globally(0, window - 1, box(CartPole::THETA, p.theta_min, p.theta_max, "theta")),
                          1.0 - p.alpha}},
                        window);
}

}  // namespace advstl::systems
