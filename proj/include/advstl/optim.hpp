#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace advstl::optim {

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment updates with bias correction. direction = +1 ascends,
/// -1 descends.
class Adam {
 public:
  Adam(std::size_t n, AdamParams p) : p_(p), m_(n, 0.0), v_(n, 0.0) {
    if (!(p_.learning_rate >= 0 && p_.beta1 >= 0 && p_.beta1 < 1 && p_.beta2 >= 0 && p_.beta2 < 1 && p_.epsilon > 0))
      throw std::invalid_argument("invalid Adam hyperparameters");
  }

  void step(std::span<double> params, std::span<const double> grad, double direction) {
    if (params.size() != m_.size() || grad.size() != m_.size())
      throw std::invalid_argument("Adam parameter/gradient size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(p_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(p_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = p_.beta1 * m_[i] + (1.0 - p_.beta1) * grad[i];
      v_[i] = p_.beta2 * v_[i] + (1.0 - p_.beta2) * grad[i] * grad[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      params[i] += direction * p_.learning_rate * mhat / (std::sqrt(vhat) + p_.epsilon);
    }
  }

  std::size_t steps() const { return t_; }

 private:
  AdamParams p_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

inline double l2_norm(std::span<const double> g) {
  double s = 0.0;
  for (double x : g) s += x * x;
  return std::sqrt(s);
}

/// Rescales g to norm max_norm when it is longer. Returns the original norm.
inline double clip_by_norm(std::span<double> g, double max_norm) {
  const double n = l2_norm(g);
  if (max_norm > 0.0 && n > max_norm) {
    const double k = max_norm / n;
    for (double& x : g) x *= k;
  }
  return n;
}

}  // namespace advstl::optim
