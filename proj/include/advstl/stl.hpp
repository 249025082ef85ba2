#pragma once

/*!
  \file stl.hpp
  \brief Bounded-time Signal Temporal Logic over discrete trajectories.

  Time bounds are inclusive step indices. A formula with temporal depth h
  evaluated at step t reads states t..t+h, and every window must fit in the
  trajectory; there is no implicit truncation.

  The quantitative evaluator computes each subformula's robustness signal once
  over the range of steps its parent needs and folds windows left to right, so
  its results are bit-identical to a direct recursion over the definitions.
  It is templated on the scalar type so the same code runs on double and on
  ad::Var.
*/

#include <advstl/autodiff.hpp>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace advstl::stl {

// ---------------------------------------------------------------------------
// Trajectory

template <class T>
class Trajectory {
 public:
  Trajectory(std::vector<T> data, std::size_t dim, double dt) : data_(std::move(data)), dim_(dim), dt_(dt) {
    if (dim_ == 0) throw std::invalid_argument("trajectory dimension must be positive");
    if (!(dt_ > 0.0)) throw std::invalid_argument("trajectory dt must be positive");
    if (data_.empty() || data_.size() % dim_ != 0)
      throw std::invalid_argument("trajectory data must hold a positive whole number of states");
  }

  std::size_t length() const { return data_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  double dt() const { return dt_; }

  std::span<const T> state(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  const T& at(std::size_t i, std::size_t component) const { return data_[i * dim_ + component]; }
  const std::vector<T>& data() const { return data_; }

  /// States [first, first + count). Components listed in `relative` are
  /// re-expressed relative to their value at `first`.
  Trajectory window(std::size_t first, std::size_t count, std::span<const std::size_t> relative = {}) const {
    if (count == 0 || first + count > length()) throw std::out_of_range("window exceeds trajectory");
    std::vector<T> out(data_.begin() + static_cast<std::ptrdiff_t>(first * dim_),
                       data_.begin() + static_cast<std::ptrdiff_t>((first + count) * dim_));
    for (std::size_t c : relative) {
      if (c >= dim_) throw std::out_of_range("relative component out of range");
      const T base = out[c];
      for (std::size_t i = 0; i < count; ++i) out[i * dim_ + c] = out[i * dim_ + c] - base;
    }
    return Trajectory(std::move(out), dim_, dt_);
  }

 private:
  std::vector<T> data_;
  std::size_t dim_;
  double dt_;
};

// ---------------------------------------------------------------------------
// Atoms: f(s) = sum_i c_i * s[k_i] + offset, satisfied when f(s) > 0.

struct Atom {
  std::vector<std::pair<std::size_t, double>> terms;
  double offset = 0.0;
  std::string label;

  template <class T>
  T evaluate(std::span<const T> s) const {
    if (terms.empty()) throw std::logic_error("atom '" + label + "' has no terms");
    T acc = term(s, terms.front());
    for (std::size_t k = 1; k < terms.size(); ++k) acc = acc + term(s, terms[k]);
    if (offset != 0.0) acc = acc + offset;
    return acc;
  }

  std::size_t max_component() const {
    std::size_t m = 0;
    for (auto& [k, c] : terms) m = std::max(m, k);
    return m;
  }

 private:
  template <class T>
  static T term(std::span<const T> s, const std::pair<std::size_t, double>& t) {
    if (t.first >= s.size()) throw std::out_of_range("atom references a missing state component");
    const T& x = s[t.first];
    if (t.second == 1.0) return x;
    if (t.second == -1.0) return -x;
    return x * t.second;
  }
};

/// s[k] >= bound, robustness s[k] - bound.
inline Atom at_least(std::size_t k, double bound, std::string label = {}) {
  return Atom{{{k, 1.0}}, -bound, label.empty() ? "s" + std::to_string(k) + ">=" + std::to_string(bound) : label};
}

/// s[k] <= bound, robustness bound - s[k].
inline Atom at_most(std::size_t k, double bound, std::string label = {}) {
  return Atom{{{k, -1.0}}, bound, label.empty() ? "s" + std::to_string(k) + "<=" + std::to_string(bound) : label};
}

// ---------------------------------------------------------------------------
// Formula

class Formula {
 public:
  enum class Kind : std::uint8_t { truth, atom, negation, conjunction, disjunction, until, eventually, globally };

  Kind kind() const { return node_->kind; }
  const Atom& atom() const { return node_->atom; }
  const Formula& lhs() const { return node_->children.at(0); }
  const Formula& rhs() const { return node_->children.at(1); }
  const Formula& child() const { return node_->children.at(0); }
  std::size_t lo() const { return node_->lo; }
  std::size_t hi() const { return node_->hi; }

  friend Formula truth();
  friend Formula atom(Atom a);
  friend Formula negation(Formula f);
  friend Formula conjunction(Formula a, Formula b);
  friend Formula disjunction(Formula a, Formula b);
  friend Formula until(std::size_t lo, std::size_t hi, Formula a, Formula b);
  friend Formula eventually(std::size_t lo, std::size_t hi, Formula f);
  friend Formula globally(std::size_t lo, std::size_t hi, Formula f);

 private:
  struct Node {
    Kind kind = Kind::truth;
    Atom atom;
    std::vector<Formula> children;
    std::size_t lo = 0;
    std::size_t hi = 0;
  };

  explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static Formula make(Kind k, std::vector<Formula> children, std::size_t lo = 0, std::size_t hi = 0, Atom a = {}) {
    if (lo > hi) throw std::invalid_argument("temporal bounds must satisfy lo <= hi");
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->atom = std::move(a);
    n->children = std::move(children);
    n->lo = lo;
    n->hi = hi;
    return Formula(std::move(n));
  }

  std::shared_ptr<const Node> node_;
};

inline Formula truth() { return Formula::make(Formula::Kind::truth, {}); }

inline Formula atom(Atom a) {
  if (a.terms.empty()) throw std::invalid_argument("atom needs at least one term");
  return Formula::make(Formula::Kind::atom, {}, 0, 0, std::move(a));
}

inline Formula negation(Formula f) { return Formula::make(Formula::Kind::negation, {std::move(f)}); }
inline Formula conjunction(Formula a, Formula b) {
  return Formula::make(Formula::Kind::conjunction, {std::move(a), std::move(b)});
}
inline Formula disjunction(Formula a, Formula b) {
  return Formula::make(Formula::Kind::disjunction, {std::move(a), std::move(b)});
}
inline Formula until(std::size_t lo, std::size_t hi, Formula a, Formula b) {
  return Formula::make(Formula::Kind::until, {std::move(a), std::move(b)}, lo, hi);
}
inline Formula eventually(std::size_t lo, std::size_t hi, Formula f) {
  return Formula::make(Formula::Kind::eventually, {std::move(f)}, lo, hi);
}
inline Formula globally(std::size_t lo, std::size_t hi, Formula f) {
  return Formula::make(Formula::Kind::globally, {std::move(f)}, lo, hi);
}

/// lo <= s[k] <= hi as a conjunction of two atoms.
inline Formula box(std::size_t k, double lo, double hi, const std::string& name = {}) {
  const std::string base = name.empty() ? "s" + std::to_string(k) : name;
  return conjunction(atom(at_most(k, hi, base + "<=" + std::to_string(hi))),
                     atom(at_least(k, lo, base + ">=" + std::to_string(lo))));
}

/// Sum of the upper bounds of nested temporal operators.
inline std::size_t temporal_depth(const Formula& f) {
  using K = Formula::Kind;
  switch (f.kind()) {
    case K::truth:
    case K::atom: return 0;
    case K::negation: return temporal_depth(f.child());
    case K::conjunction:
    case K::disjunction: return std::max(temporal_depth(f.lhs()), temporal_depth(f.rhs()));
    case K::until: return f.hi() + std::max(temporal_depth(f.lhs()), temporal_depth(f.rhs()));
    case K::eventually:
    case K::globally: return f.hi() + temporal_depth(f.child());
  }
  return 0;
}

/// Largest state component referenced by any atom, or nothing for atom-free formulas.
inline std::optional<std::size_t> max_component(const Formula& f) {
  using K = Formula::Kind;
  std::optional<std::size_t> m;
  auto merge = [&m](std::optional<std::size_t> o) {
    if (o && (!m || *o > *m)) m = o;
  };
  switch (f.kind()) {
    case K::truth: break;
    case K::atom: m = f.atom().max_component(); break;
    case K::negation:
    case K::eventually:
    case K::globally: merge(max_component(f.child())); break;
    case K::conjunction:
    case K::disjunction:
    case K::until:
      merge(max_component(f.lhs()));
      merge(max_component(f.rhs()));
      break;
  }
  return m;
}

namespace detail {

template <class T>
void check_window(const Formula& f, const Trajectory<T>& xi, std::size_t t) {
  const std::size_t depth = temporal_depth(f);
  if (t + depth >= xi.length())
    throw std::out_of_range("formula window [" + std::to_string(t) + ", " + std::to_string(t + depth) +
                            "] exceeds trajectory of length " + std::to_string(xi.length()));
}

// Robustness of f at every step in [first, last].
template <class T>
std::vector<T> robustness_signal(const Formula& f, const Trajectory<T>& xi, std::size_t first, std::size_t last) {
  using K = Formula::Kind;
  const std::size_t n = last - first + 1;
  std::vector<T> out;
  out.reserve(n);
  switch (f.kind()) {
    case K::truth: {
      // +inf is not representable on the tape; a truth leaf only occurs as the
      // left side of a derived eventually, which is evaluated directly below.
      if constexpr (std::is_same_v<T, double>) {
        out.assign(n, std::numeric_limits<double>::infinity());
        return out;
      } else {
        throw std::invalid_argument("'true' has infinite robustness and cannot be differentiated");
      }
    }
    case K::atom:
      for (std::size_t t = first; t <= last; ++t) out.push_back(f.atom().template evaluate<T>(xi.state(t)));
      return out;
    case K::negation: {
      auto c = robustness_signal(f.child(), xi, first, last);
      for (auto& v : c) out.push_back(-v);
      return out;
    }
    case K::conjunction:
    case K::disjunction: {
      auto a = robustness_signal(f.lhs(), xi, first, last);
      auto b = robustness_signal(f.rhs(), xi, first, last);
      const bool is_and = f.kind() == K::conjunction;
      for (std::size_t i = 0; i < n; ++i) out.push_back(is_and ? ad::min(a[i], b[i]) : ad::max(a[i], b[i]));
      return out;
    }
    case K::eventually:
    case K::globally: {
      const std::size_t lo = f.lo(), hi = f.hi();
      auto c = robustness_signal(f.child(), xi, first + lo, last + hi);
      const bool is_g = f.kind() == K::globally;
      for (std::size_t i = 0; i < n; ++i) {
        T acc = c[i];
        for (std::size_t k = i + 1; k <= i + hi - lo; ++k) acc = is_g ? ad::min(acc, c[k]) : ad::max(acc, c[k]);
        out.push_back(acc);
      }
      return out;
    }
    case K::until: {
      const std::size_t lo = f.lo(), hi = f.hi();
      const bool left_true = f.lhs().kind() == K::truth;
      std::vector<T> r1;
      if (!left_true) r1 = robustness_signal(f.lhs(), xi, first, last + hi);
      auto r2 = robustness_signal(f.rhs(), xi, first + lo, last + hi);
      for (std::size_t i = 0; i < n; ++i) {
        // inf over s in [t, tau] of r1, built left to right.
        T best{};
        T inf1{};
        if (!left_true) {
          inf1 = r1[i];
          for (std::size_t k = i + 1; k <= i + lo; ++k) inf1 = ad::min(inf1, r1[k]);
        }
        for (std::size_t tau = lo; tau <= hi; ++tau) {
          if (!left_true && tau > lo) inf1 = ad::min(inf1, r1[i + tau]);
          const T& rho2 = r2[i + tau - lo];
          T cand = left_true ? rho2 : ad::min(rho2, inf1);
          best = tau == lo ? cand : ad::max(best, cand);
        }
        out.push_back(best);
      }
      return out;
    }
  }
  throw std::logic_error("unknown formula kind");
}

inline std::vector<char> satisfaction_signal(const Formula& f, const Trajectory<double>& xi, std::size_t first,
                                             std::size_t last) {
  using K = Formula::Kind;
  const std::size_t n = last - first + 1;
  std::vector<char> out(n, 0);
  switch (f.kind()) {
    case K::truth: std::fill(out.begin(), out.end(), 1); return out;
    case K::atom:
      for (std::size_t i = 0; i < n; ++i) out[i] = f.atom().evaluate<double>(xi.state(first + i)) > 0.0;
      return out;
    case K::negation: {
      auto c = satisfaction_signal(f.child(), xi, first, last);
      for (std::size_t i = 0; i < n; ++i) out[i] = !c[i];
      return out;
    }
    case K::conjunction:
    case K::disjunction: {
      auto a = satisfaction_signal(f.lhs(), xi, first, last);
      auto b = satisfaction_signal(f.rhs(), xi, first, last);
      for (std::size_t i = 0; i < n; ++i) out[i] = f.kind() == K::conjunction ? (a[i] && b[i]) : (a[i] || b[i]);
      return out;
    }
    case K::eventually:
    case K::globally: {
      auto c = satisfaction_signal(f.child(), xi, first + f.lo(), last + f.hi());
      const bool is_g = f.kind() == K::globally;
      for (std::size_t i = 0; i < n; ++i) {
        bool acc = is_g;
        for (std::size_t k = i; k <= i + f.hi() - f.lo(); ++k) acc = is_g ? (acc && c[k]) : (acc || c[k]);
        out[i] = acc;
      }
      return out;
    }
    case K::until: {
      const std::size_t lo = f.lo(), hi = f.hi();
      auto s1 = satisfaction_signal(f.lhs(), xi, first, last + hi);
      auto s2 = satisfaction_signal(f.rhs(), xi, first + lo, last + hi);
      for (std::size_t i = 0; i < n; ++i) {
        bool held = true;  // phi1 on [t, tau]
        for (std::size_t k = i; k < i + lo; ++k) held = held && s1[k];
        bool found = false;
        for (std::size_t tau = lo; tau <= hi && !found; ++tau) {
          held = held && s1[i + tau];
          if (!held) break;
          found = s2[i + tau - lo];
        }
        out[i] = found;
      }
      return out;
    }
  }
  throw std::logic_error("unknown formula kind");
}

}  // namespace detail

/// Quantitative semantics of f at step t. Works on double and ad::Var; the
/// forward value is the same on both.
template <class T>
T robustness(const Formula& f, const Trajectory<T>& xi, std::size_t t) {
  detail::check_window(f, xi, t);
  return detail::robustness_signal(f, xi, t, t).front();
}

/// Robustness at every step t in [first, last].
template <class T>
std::vector<T> robustness_range(const Formula& f, const Trajectory<T>& xi, std::size_t first, std::size_t last) {
  if (first > last) throw std::invalid_argument("empty evaluation range");
  detail::check_window(f, xi, last);
  return detail::robustness_signal(f, xi, first, last);
}

/// Boolean semantics of f at step t.
inline bool satisfies(const Formula& f, const Trajectory<double>& xi, std::size_t t) {
  detail::check_window(f, xi, t);
  return detail::satisfaction_signal(f, xi, t, t).front() != 0;
}

/// Boolean summary of a robustness value. Zero is reported unsatisfied and
/// flagged as a boundary case.
struct Verdict {
  bool satisfied = false;
  bool boundary = false;
};

inline Verdict verdict(double rho) { return Verdict{rho > 0.0, rho == 0.0}; }

// ---------------------------------------------------------------------------
// Weighted requirement sets

struct Requirement {
  std::string name;
  Formula formula;
  double weight = 1.0;
};

/// Requirements evaluated over windows of `window` states. Components listed in
/// `window_relative` are re-based to the first state of every window.
class RequirementSet {
 public:
  RequirementSet(std::vector<Requirement> items, std::size_t window, std::vector<std::size_t> window_relative = {})
      : items_(std::move(items)), window_(window), window_relative_(std::move(window_relative)) {
    if (items_.empty()) throw std::invalid_argument("requirement set is empty");
    if (window_ == 0) throw std::invalid_argument("requirement window must be positive");
    double total = 0.0;
    for (auto& r : items_) {
      if (!(r.weight >= 0.0)) throw std::invalid_argument("requirement '" + r.name + "' has a negative weight");
      if (temporal_depth(r.formula) + 1 > window_)
        throw std::invalid_argument("requirement '" + r.name + "' needs " +
                                    std::to_string(temporal_depth(r.formula) + 1) + " states but the window is " +
                                    std::to_string(window_));
      total += r.weight;
    }
    if (!(total > 0.0)) throw std::invalid_argument("requirement weights must sum to a positive value");
    total_weight_ = total;
  }

  const std::vector<Requirement>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t window() const { return window_; }
  const std::vector<std::size_t>& window_relative() const { return window_relative_; }
  double total_weight() const { return total_weight_; }

 private:
  std::vector<Requirement> items_;
  std::size_t window_;
  std::vector<std::size_t> window_relative_;
  double total_weight_ = 0.0;
};

/// (1 / sum_i w_i) * sum_i w_i * rho_i(xi, t).
template <class T>
T combined_robustness(const RequirementSet& reqs, const Trajectory<T>& xi, std::size_t t) {
  const auto& items = reqs.items();
  T sum = robustness(items.front().formula, xi, t) * items.front().weight;
  for (std::size_t i = 1; i < items.size(); ++i) sum = sum + robustness(items[i].formula, xi, t) * items[i].weight;
  return sum / reqs.total_weight();
}

inline double combine(std::span<const double> rho, std::span<const double> weights) {
  if (rho.empty() || rho.size() != weights.size()) throw std::invalid_argument("weights and robustness mismatch");
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("weights must sum to a positive value");
  double sum = rho[0] * weights[0];
  for (std::size_t i = 1; i < rho.size(); ++i) sum = sum + rho[i] * weights[i];
  return sum / total;
}

}  // namespace advstl::stl
