#pragma once

/*!
  \file policy.hpp
  \brief Small feed-forward policies with bounded outputs.

  Parameters are one flat vector: for every layer, the row-major weight matrix
  (out x in) followed by the out biases. Hidden layers use Leaky ReLU; each
  output is squashed as mid + half * tanh(z) into its [lo, hi] interval and
  then hard-clamped.
*/

#include <advstl/autodiff.hpp>

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace advstl::policy {

struct MlpSpec {
  std::size_t inputs = 0;
  std::vector<std::size_t> hidden;
  std::vector<double> out_lo;
  std::vector<double> out_hi;
  double leaky_slope = ad::default_leaky_slope;

  std::size_t outputs() const { return out_lo.size(); }

  /// Layer widths including the input and output layers.
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w{inputs};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(outputs());
    return w;
  }

  std::size_t param_count() const {
    const auto w = widths();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) n += (w[l] + 1) * w[l + 1];
    return n;
  }

  void validate() const {
    if (inputs == 0) throw std::invalid_argument("network needs at least one input");
    if (out_lo.empty() || out_lo.size() != out_hi.size())
      throw std::invalid_argument("network output bounds are missing or inconsistent");
    for (std::size_t h : hidden)
      if (h == 0) throw std::invalid_argument("hidden layer width must be positive");
    for (std::size_t i = 0; i < out_lo.size(); ++i)
      if (!(out_lo[i] <= out_hi[i])) throw std::invalid_argument("output bound has lo > hi");
    if (!(leaky_slope >= 0.0)) throw std::invalid_argument("leaky slope must be non-negative");
  }

  bool operator==(const MlpSpec&) const = default;
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  const MlpSpec& spec() const { return spec_; }
  std::size_t param_count() const { return spec_.param_count(); }
  std::size_t inputs() const { return spec_.inputs; }
  std::size_t outputs() const { return spec_.outputs(); }

  template <class T>
  std::vector<T> forward(std::span<const T> params, std::span<const T> input) const {
    if (params.size() != param_count())
      throw std::invalid_argument("network expects " + std::to_string(param_count()) + " parameters, got " +
                                  std::to_string(params.size()));
    if (input.size() != spec_.inputs)
      throw std::invalid_argument("network expects " + std::to_string(spec_.inputs) + " inputs, got " +
                                  std::to_string(input.size()));
    const auto w = spec_.widths();
    std::vector<T> x(input.begin(), input.end());
    std::size_t p = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      const std::size_t in = w[l], out = w[l + 1];
      const bool last = l + 2 == w.size();
      std::vector<T> y;
      y.reserve(out);
      for (std::size_t o = 0; o < out; ++o) {
        T acc = params[p + o * in] * x[0];
        for (std::size_t i = 1; i < in; ++i) acc = acc + params[p + o * in + i] * x[i];
        acc = acc + params[p + out * in + o];
        y.push_back(last ? acc : ad::leaky_relu(acc, spec_.leaky_slope));
      }
      p += (in + 1) * out;
      x = std::move(y);
    }
    for (std::size_t o = 0; o < x.size(); ++o) {
      const double lo = spec_.out_lo[o], hi = spec_.out_hi[o];
      const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
      x[o] = ad::clamp(ad::tanh(x[o]) * half + mid, lo, hi);
    }
    return x;
  }

  template <class T>
  std::vector<T> forward(const std::vector<T>& params, const std::vector<T>& input) const {
    return forward(std::span<const T>(params), std::span<const T>(input));
  }

 private:
  MlpSpec spec_;
};

/// Uniform(-b, b) weights with b = sqrt(6 / (fan_in + fan_out)); zero biases.
template <class Rng>
std::vector<double> init_params(Rng& rng, const MlpSpec& spec) {
  spec.validate();
  const auto w = spec.widths();
  std::vector<double> theta;
  theta.reserve(spec.param_count());
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w[l] + w[l + 1]));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t k = 0; k < w[l] * w[l + 1]; ++k) theta.push_back(u(rng));
    theta.insert(theta.end(), w[l + 1], 0.0);
  }
  return theta;
}

/// A network together with its parameter vector.
struct Policy {
  Mlp net;
  std::vector<double> params;

  Policy() = default;
  Policy(Mlp n, std::vector<double> p) : net(std::move(n)), params(std::move(p)) {
    if (params.size() != net.param_count()) throw std::invalid_argument("parameter count does not match network");
  }
};

/// Attacker: A(theta, o_e, z) with the noise concatenated after the observation.
template <class T>
std::vector<T> attacker_forward(const Mlp& net, std::span<const T> theta, std::span<const T> obs,
                                std::span<const T> z) {
  if (obs.size() + z.size() != net.inputs())
    throw std::invalid_argument("attacker input width " + std::to_string(net.inputs()) + " != observation " +
                                std::to_string(obs.size()) + " + noise " + std::to_string(z.size()));
  std::vector<T> in(obs.begin(), obs.end());
  in.insert(in.end(), z.begin(), z.end());
  return net.forward<T>(theta, in);
}

/// Defender: D(theta, o_a).
template <class T>
std::vector<T> defender_forward(const Mlp& net, std::span<const T> theta, std::span<const T> obs) {
  return net.forward<T>(theta, obs);
}

}  // namespace advstl::policy
