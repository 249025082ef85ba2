#pragma once

/*!
  \file platoon.hpp
  \brief Leader/follower car platooning.

  Basic mode: each car receives an input acceleration a_in and
  m dv/dt = m a_in - nu m g.

  Energy mode: each car receives a motor torque T_m and a brake torque T_b,
    T_w   = T_m r_g + T_b
    m x_dd = T_w / R_e - C_r m g x_dot - 0.5 rho C_a S x_dot^2
    w_m   = (r_g / R_e) x_dot
    P_m   = T_m w_m eta(T_m, w_m)^(-sign(T_m))
  and the follower accumulates electrical energy e (kJ, floored at 0).

  Chain mode: n cars in basic mode, the leader driven by the environment and
  every follower driven by the same defender.
*/

#include <advstl/sim.hpp>
#include <advstl/stl.hpp>

#include <atomic>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace advstl::systems {

/// Smooth surrogate of a powertrain efficiency map, symmetric in torque sign.
/// eta = peak - (peak - edge) * q / 2, where q is the squared normalized
/// distance from the sweet spot; q reaches 2 at the corner farthest from it.
struct EfficiencyMap {
  double torque_max = 180.0;     // N m
  double speed_max_rpm = 1140.0;
  double peak = 0.92;
  double edge = 0.55;
  double peak_torque_frac = 0.6;
  double peak_speed_frac = 0.5;

  double speed_max() const { return speed_max_rpm * 2.0 * std::numbers::pi / 60.0; }  // rad/s

  void validate() const {
    if (!(torque_max > 0 && speed_max_rpm > 0)) throw std::invalid_argument("efficiency map limits must be positive");
    if (!(edge > 0 && edge <= peak && peak <= 1.0))
      throw std::invalid_argument("efficiency map needs 0 < edge <= peak <= 1");
    if (!(peak_torque_frac >= 0 && peak_torque_frac <= 1 && peak_speed_frac >= 0 && peak_speed_frac <= 1))
      throw std::invalid_argument("efficiency sweet spot must lie inside the map");
  }

  /// eta(T_m, w_m). Inputs outside [-T_max, T_max] x [0, w_max] are clamped;
  /// `clamped` reports whether that happened.
  template <class T>
  T operator()(const T& torque, const T& speed, bool* clamped = nullptr) const {
    const double tq = std::abs(ad::value_of(torque)), sp = ad::value_of(speed);
    if (clamped) *clamped = tq > torque_max || sp < 0.0 || sp > speed_max();
    const T u = ad::clamp(ad::abs(torque) * (1.0 / torque_max), 0.0, 1.0);
    const T w = ad::clamp(speed * (1.0 / speed_max()), 0.0, 1.0);
    const double du = std::max(peak_torque_frac, 1.0 - peak_torque_frac);
    const double dw = std::max(peak_speed_frac, 1.0 - peak_speed_frac);
    const T a = (u - peak_torque_frac) * (1.0 / du);
    const T b = (w - peak_speed_frac) * (1.0 / dw);
    const T q = a * a + b * b;
    return peak - q * (0.5 * (peak - edge));
  }
};

struct VehicleParams {
  double mass = 100.0;            // kg
  double wheel_radius = 0.3;      // R_e, m
  double gear_ratio = 0.96;       // r_g
  double rolling_coeff = 0.001;   // C_r, multiplies m g x_dot
  double air_density = 1.2;       // kg/m^3
  double drag_coeff = 0.3;        // C_a
  double frontal_area = 0.8;      // S, m^2
  double brake_torque_max = 300;  // |T_b| bound, N m
  EfficiencyMap efficiency;

  void validate() const {
    if (!(mass > 0 && wheel_radius > 0 && gear_ratio > 0 && rolling_coeff > 0 && air_density > 0 &&
          drag_coeff > 0 && frontal_area > 0 && brake_torque_max >= 0))
      throw std::invalid_argument("vehicle constants must be positive");
    efficiency.validate();
  }

  double motor_speed(double v) const { return gear_ratio / wheel_radius * v; }
};

/// Electrical power T_m w_m eta^(-sign(T_m)) in watts.
template <class T>
T motor_power(const T& torque, const T& speed, const T& eta) {
  const double tq = ad::value_of(torque);
  if (tq > 0.0) return torque * speed / eta;
  if (tq < 0.0) return torque * speed * eta;
  return torque * speed;
}

struct PlatoonParams {
  double dt = 0.05;
  double gravity = 9.81;
  double friction = 0.01;  // nu, basic mode
  double accel_min = -5.0;
  double accel_max = 5.0;
  double speed_min = 0.0;
  double speed_max = 37.0;
  sim::Integrator integrator = sim::Integrator::semi_implicit;
  VehicleParams vehicle;

  double dist_min = 1.0;
  double dist_max = 10.0;
  double energy_max = 30.0;  // kJ per evaluation window
  double alpha = 0.98;

  void validate() const {
    if (!(dt > 0 && gravity > 0 && friction >= 0)) throw std::invalid_argument("platoon dt, gravity, friction invalid");
    if (!(accel_min <= accel_max && speed_min <= speed_max)) throw std::invalid_argument("platoon bounds unordered");
    if (!(dist_min < dist_max)) throw std::invalid_argument("platoon requires dist_min < dist_max");
    if (!(energy_max > 0)) throw std::invalid_argument("energy budget must be positive");
    if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("alpha must lie in [0, 1]");
    vehicle.validate();
  }
};

namespace detail {

// Increments (dx, dv) of one car under acceleration a, with the velocity projected into bounds.
template <class T>
std::pair<T, T> car_update(const PlatoonParams& p, const T& v, const T& a) {
  const T v_next = ad::clamp(v + a * p.dt, p.speed_min, p.speed_max);
  if (p.integrator == sim::Integrator::explicit_euler) return {v * p.dt, v_next - v};
  return {v_next * p.dt, v_next - v};
}

}  // namespace detail

/// Two cars, accelerations as actions. State (x_l, v_l, x_f, v_f).
class PlatoonBasic final : public sim::ModelBase<PlatoonBasic> {
 public:
  enum : std::size_t { X_L, V_L, X_F, V_F };
  enum : std::size_t { M_DIST = 4 };

  explicit PlatoonBasic(PlatoonParams p = {}) : p_(p) {
    p_.validate();
    agent_ = sim::ActionSpace({"accel_f"}, {p_.accel_min}, {p_.accel_max});
    env_ = sim::ActionSpace({"accel_l"}, {p_.accel_min}, {p_.accel_max});
  }

  const PlatoonParams& params() const { return p_; }
  std::string name() const override { return "platoon_basic"; }
  double dt() const override { return p_.dt; }
  std::vector<std::string> state_names() const override { return {"x_l", "v_l", "x_f", "v_f"}; }
  std::vector<std::string> monitored_names() const override { return {"x_l", "v_l", "x_f", "v_f", "d"}; }
  const sim::ActionSpace& agent_actions() const override { return agent_; }
  const sim::ActionSpace& env_actions() const override { return env_; }
  std::size_t agent_obs_dim() const override { return 3; }
  std::size_t env_obs_dim() const override { return 3; }
  std::size_t noise_dim() const override { return 2; }
  std::vector<std::string> initial_variables() const override { return {"d", "v_l", "v_f"}; }
  std::vector<double> make_initial_state(std::span<const double> v) const override {
    if (v.size() != 3) throw std::invalid_argument("platoon initial state needs d, v_l, v_f");
    return {v[0], v[1], 0.0, v[2]};
  }

  template <class T>
  std::vector<T> psi_impl(std::span<const T> s, std::span<const T> ua, std::span<const T> ue, double) const {
    if (s.size() != 4 || ua.size() != 1 || ue.size() != 1) throw std::invalid_argument("platoon input sizes");
    const double drag = p_.friction * p_.gravity;
    const auto [dxl, dvl] = detail::car_update<T>(p_, s[V_L], ue[0] - drag);
    const auto [dxf, dvf] = detail::car_update<T>(p_, s[V_F], ua[0] - drag);
    return {dxl, dvl, dxf, dvf};
  }

  template <class T>
  std::vector<T> observe_agent_impl(std::span<const T> s) const {
    return {s[V_L], s[V_F], s[X_L] - s[X_F]};
  }
  template <class T>
  std::vector<T> observe_env_impl(std::span<const T> s) const {
    return {s[V_L], s[V_F], s[X_L] - s[X_F]};
  }
  template <class T>
  std::vector<T> monitored_impl(std::span<const T> s) const {
    return {s[X_L], s[V_L], s[X_F], s[V_F], s[X_L] - s[X_F]};
  }

 private:
  PlatoonParams p_;
  sim::ActionSpace agent_;
  sim::ActionSpace env_;
};

/// Two cars driven by motor and brake torques. State (x_l, v_l, x_f, v_f, e).
class PlatoonEnergy final : public sim::ModelBase<PlatoonEnergy> {
 public:
  enum : std::size_t { X_L, V_L, X_F, V_F, ENERGY };
  enum : std::size_t { M_ENERGY = 4, M_DIST = 5 };

  explicit PlatoonEnergy(PlatoonParams p = {}) : p_(p) {
    p_.validate();
    const auto& v = p_.vehicle;
    agent_ = sim::ActionSpace({"motor_torque_f", "brake_torque_f"}, {-v.efficiency.torque_max, -v.brake_torque_max},
                              {v.efficiency.torque_max, 0.0});
    env_ = sim::ActionSpace({"motor_torque_l", "brake_torque_l"}, {-v.efficiency.torque_max, -v.brake_torque_max},
                            {v.efficiency.torque_max, 0.0});
  }

  const PlatoonParams& params() const { return p_; }
  std::string name() const override { return "platoon_energy"; }
  double dt() const override { return p_.dt; }
  std::vector<std::string> state_names() const override { return {"x_l", "v_l", "x_f", "v_f", "e"}; }
  std::vector<std::string> monitored_names() const override { return {"x_l", "v_l", "x_f", "v_f", "e", "d"}; }
  const sim::ActionSpace& agent_actions() const override { return agent_; }
  const sim::ActionSpace& env_actions() const override { return env_; }
  std::size_t agent_obs_dim() const override { return 3; }
  std::size_t env_obs_dim() const override { return 3; }
  std::size_t noise_dim() const override { return 2; }
  std::vector<std::string> initial_variables() const override { return {"d", "v_l", "v_f"}; }
  std::vector<double> make_initial_state(std::span<const double> v) const override {
    if (v.size() != 3) throw std::invalid_argument("platoon initial state needs d, v_l, v_f");
    return {v[0], v[1], 0.0, v[2], 0.0};
  }

  /// Number of steps on which a motor above its speed cap had its torque forced to zero.
  std::size_t speed_cap_events() const { return cap_events_.load(); }

  /// Longitudinal acceleration for the given torques at speed v, before bounds.
  template <class T>
  T acceleration(const T& v, const T& motor_torque, const T& brake_torque) const {
    const auto& c = p_.vehicle;
    const T wheel_torque = motor_torque * c.gear_ratio + brake_torque;
    const T force = wheel_torque * (1.0 / c.wheel_radius) - v * (c.rolling_coeff * c.mass * p_.gravity) -
                    v * v * (0.5 * c.air_density * c.drag_coeff * c.frontal_area);
    return force * (1.0 / c.mass);
  }

  /// Motor torque actually applied: zero above the speed cap.
  template <class T>
  T effective_torque(const T& v, const T& motor_torque) const {
    const double w = p_.vehicle.motor_speed(ad::value_of(v));
    if (w > p_.vehicle.efficiency.speed_max()) {
      cap_events_.fetch_add(1);
      return motor_torque * 0.0;
    }
    return motor_torque;
  }

  template <class T>
  std::vector<T> psi_impl(std::span<const T> s, std::span<const T> ua, std::span<const T> ue, double) const {
    if (s.size() != 5 || ua.size() != 2 || ue.size() != 2) throw std::invalid_argument("platoon input sizes");
    const auto& c = p_.vehicle;
    const T tl = effective_torque(s[V_L], ue[0]);
    const T tf = effective_torque(s[V_F], ua[0]);
    const T al = ad::clamp(acceleration(s[V_L], tl, ue[1]), p_.accel_min, p_.accel_max);
    const T af = ad::clamp(acceleration(s[V_F], tf, ua[1]), p_.accel_min, p_.accel_max);
    const auto [dxl, dvl] = detail::car_update<T>(p_, s[V_L], al);
    const auto [dxf, dvf] = detail::car_update<T>(p_, s[V_F], af);

    const T w = s[V_F] * (c.gear_ratio / c.wheel_radius);
    const T eta = c.efficiency(tf, w);
    const T power = motor_power(tf, w, eta);
    const T e_next = ad::max(s[ENERGY] + power * (p_.dt / 1000.0), 0.0);
    return {dxl, dvl, dxf, dvf, e_next - s[ENERGY]};
  }

  template <class T>
  std::vector<T> observe_agent_impl(std::span<const T> s) const {
    return {s[V_L], s[V_F], s[X_L] - s[X_F]};
  }
  template <class T>
  std::vector<T> observe_env_impl(std::span<const T> s) const {
    return {s[V_L], s[V_F], s[X_L] - s[X_F]};
  }
  template <class T>
  std::vector<T> monitored_impl(std::span<const T> s) const {
    return {s[X_L], s[V_L], s[X_F], s[V_F], s[ENERGY], s[X_L] - s[X_F]};
  }

 private:
  PlatoonParams p_;
  sim::ActionSpace agent_;
  sim::ActionSpace env_;
  mutable std::atomic<std::size_t> cap_events_{0};
};

/// n cars in basic mode. State (x_0, v_0, ..., x_{n-1}, v_{n-1}); car 0 leads.
/// Follower i observes (v_{i-1}, v_i, d_i) with d_i = x_{i-1} - x_i.
class PlatoonChain final : public sim::ModelBase<PlatoonChain> {
 public:
  PlatoonChain(std::size_t cars, PlatoonParams p = {}) : n_(cars), p_(p) {
    if (n_ < 2) throw std::invalid_argument("a platoon needs at least two cars");
    p_.validate();
    agent_ = sim::ActionSpace({"accel_f"}, {p_.accel_min}, {p_.accel_max});
    env_ = sim::ActionSpace({"accel_l"}, {p_.accel_min}, {p_.accel_max});
  }

  std::size_t cars() const { return n_; }
  const PlatoonParams& params() const { return p_; }
  /// Monitored index of gap d_i, i in [1, n).
  std::size_t gap_index(std::size_t i) const { return 2 * n_ + i - 1; }

  std::string name() const override { return "platoon_chain"; }
  double dt() const override { return p_.dt; }
  std::vector<std::string> state_names() const override {
    if (n_ == 2) return {"x_l", "v_l", "x_f", "v_f"};
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n_; ++i) {
      out.push_back("x_" + std::to_string(i));
      out.push_back("v_" + std::to_string(i));
    }
    return out;
  }
  std::vector<std::string> monitored_names() const override {
    auto out = state_names();
    if (n_ == 2) {
      out.push_back("d");
      return out;
    }
    for (std::size_t i = 1; i < n_; ++i) out.push_back("d_" + std::to_string(i));
    return out;
  }
  const sim::ActionSpace& agent_actions() const override { return agent_; }
  const sim::ActionSpace& env_actions() const override { return env_; }
  std::size_t agent_replicas() const override { return n_ - 1; }
  std::size_t agent_obs_dim() const override { return 3; }
  std::size_t env_obs_dim() const override { return 3; }
  std::size_t noise_dim() const override { return 2; }

  std::vector<std::string> initial_variables() const override {
    if (n_ == 2) return {"d", "v_l", "v_f"};
    std::vector<std::string> out;
    for (std::size_t i = 1; i < n_; ++i) out.push_back("d_" + std::to_string(i));
    for (std::size_t i = 0; i < n_; ++i) out.push_back("v_" + std::to_string(i));
    return out;
  }
  /// Gaps then speeds for n > 2; (d, v_l, v_f) for two cars. The last car starts at x = 0.
  std::vector<double> make_initial_state(std::span<const double> v) const override {
    if (v.size() != 2 * n_ - 1) throw std::invalid_argument("platoon chain initial state has the wrong size");
    std::vector<double> s(2 * n_);
    if (n_ == 2) return {v[0], v[1], 0.0, v[2]};
    s[2 * (n_ - 1)] = 0.0;
    for (std::size_t i = n_ - 1; i-- > 0;) s[2 * i] = s[2 * (i + 1)] + v[i];
    for (std::size_t i = 0; i < n_; ++i) s[2 * i + 1] = v[n_ - 1 + i];
    return s;
  }

  template <class T>
  std::vector<T> psi_impl(std::span<const T> s, std::span<const T> ua, std::span<const T> ue, double) const {
    if (s.size() != 2 * n_ || ua.size() != n_ - 1 || ue.size() != 1)
      throw std::invalid_argument("platoon chain input sizes");
    const double drag = p_.friction * p_.gravity;
    std::vector<T> inc;
    inc.reserve(2 * n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const T a = (i == 0 ? ue[0] : ua[i - 1]) - drag;
      const auto [dx, dv] = detail::car_update<T>(p_, s[2 * i + 1], a);
      inc.push_back(dx);
      inc.push_back(dv);
    }
    return inc;
  }

  template <class T>
  std::vector<T> observe_agent_impl(std::span<const T> s) const {
    std::vector<T> o;
    o.reserve(3 * (n_ - 1));
    for (std::size_t i = 1; i < n_; ++i) {
      o.push_back(s[2 * i - 1]);
      o.push_back(s[2 * i + 1]);
      o.push_back(s[2 * i - 2] - s[2 * i]);
    }
    return o;
  }
  template <class T>
  std::vector<T> observe_env_impl(std::span<const T> s) const {
    return {s[1], s[3], s[0] - s[2]};
  }
  template <class T>
  std::vector<T> monitored_impl(std::span<const T> s) const {
    std::vector<T> m(s.begin(), s.end());
    for (std::size_t i = 1; i < n_; ++i) m.push_back(s[2 * i - 2] - s[2 * i]);
    return m;
  }

 private:
  std::size_t n_;
  PlatoonParams p_;
  sim::ActionSpace agent_;
  sim::ActionSpace env_;
};

/// Basic mode: phi_d alone. Energy mode: phi_d and phi_e = G[0,h-1](e <= e_max)
/// weighted (alpha, 1 - alpha), with e re-based at every window start.
inline stl::RequirementSet platoon_requirements(const PlatoonParams& p, std::size_t window, bool energy) {
  if (window == 0) throw std::invalid_argument("window must be positive");
  p.validate();
  using namespace stl;
  if (!energy) {
    return RequirementSet({{"phi_d", globally(0, window - 1, box(PlatoonBasic::M_DIST, p.dist_min, p.dist_max, "d")),
                            1.0}},
                          window);
  }
  return RequirementSet(
      {{"phi_d", globally(0, window - 1, box(PlatoonEnergy::M_DIST, p.dist_min, p.dist_max, "d")), p.alpha},
       {"phi_e", globally(0, window - 1, atom(at_most(PlatoonEnergy::M_ENERGY, p.energy_max, "e<=e_max"))),
        1.0 - p.alpha}},
      window, {PlatoonEnergy::M_ENERGY});
}

/// phi_d over every gap of the chain.
inline stl::RequirementSet platoon_chain_requirements(const PlatoonChain& m, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be positive");
  const auto& p = m.params();
  using namespace stl;
  Formula all = box(m.gap_index(1), p.dist_min, p.dist_max, m.cars() == 2 ? "d" : "d_1");
  for (std::size_t i = 2; i < m.cars(); ++i)
    all = conjunction(all, box(m.gap_index(i), p.dist_min, p.dist_max, "d_" + std::to_string(i)));
  return RequirementSet({{"phi_d", globally(0, window - 1, all), 1.0}}, window);
}

}  // namespace advstl::systems
