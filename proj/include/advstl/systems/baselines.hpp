#pragma once

/*!
  \file baselines.hpp
  \brief Classical controllers used as comparison baselines.

  PidFollower tracks a target gap from the follower observation
  (v_leader, v_follower, d). SlidingModeBalancer stabilizes the pole angle
  only; it does not track the moving target.
*/

#include <advstl/systems/cartpole.hpp>
#include <advstl/systems/platoon.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace advstl::systems {

struct PidGains {
  double kp = 0.5;
  double ki = 0.0;  // the PD core is overdamped; integral action only adds overshoot
  double kd = 1.6;
  double target_distance = 5.5;
  double integral_limit = 5.0;  // anti-windup clamp on the accumulated error (m s)
  double integral_zone = 0.5;   // integrate only while |error| is below this (m)
  double feedforward = 0.0981;  // added acceleration, compensates rolling friction nu g
  double accel_min = -5.0;
  double accel_max = 5.0;
};

/// Gap-tracking PID with conditional integration and integral clamping.
/// The derivative term uses the relative speed v_l - v_f = d(gap)/dt.
class PidFollower {
 public:
  PidFollower(PidGains g, double dt) : g_(g), dt_(dt) {
    if (!(dt_ > 0)) throw std::invalid_argument("PID dt must be positive");
    if (!(g_.accel_min <= g_.accel_max)) throw std::invalid_argument("PID acceleration bounds unordered");
  }

  void reset() { integral_ = 0.0; }

  double act(std::span<const double> obs) {
    if (obs.size() != 3) throw std::invalid_argument("PID expects (v_leader, v_follower, d)");
    const double error = obs[2] - g_.target_distance;
    const double rate = obs[0] - obs[1];
    const double unsat_without_i = g_.kp * error + g_.kd * rate + g_.feedforward;
    const double trial = unsat_without_i + g_.ki * integral_;
    const bool saturated = trial > g_.accel_max || trial < g_.accel_min;
    if (std::abs(error) < g_.integral_zone && !saturated)
      integral_ = std::clamp(integral_ + error * dt_, -g_.integral_limit, g_.integral_limit);
    const double u = unsat_without_i + g_.ki * integral_;
    return std::clamp(u, g_.accel_min, g_.accel_max);
  }

  const PidGains& gains() const { return g_; }
  double integral() const { return integral_; }

 private:
  PidGains g_;
  double dt_;
  double integral_ = 0.0;
};

/// Motor and brake torques producing acceleration `a` at speed v on the energy
/// model: motor (including regeneration) first, friction brake for the rest.
inline std::vector<double> torques_for_acceleration(const PlatoonEnergy& m, double a, double v) {
  const auto& c = m.params().vehicle;
  const double resist = c.rolling_coeff * c.mass * m.params().gravity * v +
                        0.5 * c.air_density * c.drag_coeff * c.frontal_area * v * v;
  const double wheel_torque = (c.mass * a + resist) * c.wheel_radius;
  const double tmax = c.efficiency.torque_max;
  const double motor = std::clamp(wheel_torque / c.gear_ratio, -tmax, tmax);
  const double rest = wheel_torque - motor * c.gear_ratio;
  const double brake = std::clamp(std::min(rest, 0.0), -c.brake_torque_max, 0.0);
  return {motor, brake};
}

struct SmcGains {
  double gain = 30.0;      // K, N
  double lambda = 8.0;     // sliding surface slope, 1/s
  double boundary = 2.0;   // boundary-layer width, rad/s
};

/// f = K sat(sigma / phi) on sigma = theta_dot + lambda theta. A positive
/// angle is corrected by pushing the cart in the positive x direction.
class SlidingModeBalancer {
 public:
  explicit SlidingModeBalancer(SmcGains g) : g_(g) {
    if (!(g_.gain >= 0 && g_.lambda > 0 && g_.boundary > 0)) throw std::invalid_argument("invalid SMC gains");
  }

  double act(std::span<const double> obs) const {
    if (obs.size() < 4) throw std::invalid_argument("SMC expects the cart-pole state");
    const double sigma = obs[CartPole::THETA_DOT] + g_.lambda * obs[CartPole::THETA];
    return g_.gain * std::clamp(sigma / g_.boundary, -1.0, 1.0);
  }

  const SmcGains& gains() const { return g_; }

 private:
  SmcGains g_;
};

}  // namespace advstl::systems
