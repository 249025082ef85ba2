#pragma once

/*!
  \file autodiff.hpp
  \brief Scalar tape-based reverse-mode automatic differentiation.

  A Tape is an append-only list of nodes in topological order. Every
  arithmetic operation on Var handles appends one node. backward() runs a
  single reverse sweep and leaves d(root)/d(node) in each node's adjoint.

  Subgradients at ties: min, max and abs route the full gradient to the left
  operand when the operands are equal (abs at 0 has derivative +1). clamp is
  min(max(x, lo), hi) and inherits that rule.

  The same free functions (ad::min, ad::tanh, ...) are overloaded for double so
  templated model code evaluates bit-identically on both scalar types.
*/

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace advstl::ad {

enum class Op : std::uint8_t {
  constant,
  add,
  sub,
  mul,
  div,
  neg,
  min,
  max,
  abs,
  tanh,
  leaky_relu,
  sin,
  cos,
  exp,
  pow_const,
};

inline constexpr std::uint32_t no_parent = std::numeric_limits<std::uint32_t>::max();
inline constexpr double default_leaky_slope = 0.01;

struct Node {
  Op op = Op::constant;
  std::uint32_t lhs = no_parent;
  std::uint32_t rhs = no_parent;
  double value = 0.0;
  double aux = 0.0;  // leaky-relu slope or constant exponent
  double adjoint = 0.0;
};

// Forward rule shared by the tape and by replay().
inline double evaluate_op(Op op, double a, double b, double aux) {
  switch (op) {
    case Op::constant: return a;
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    case Op::neg: return -a;
    case Op::min: return a <= b ? a : b;
    case Op::max: return a >= b ? a : b;
    case Op::abs: return a >= 0.0 ? a : -a;
    case Op::tanh: return std::tanh(a);
    case Op::leaky_relu: return a >= 0.0 ? a : aux * a;
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::exp: return std::exp(a);
    case Op::pow_const: return std::pow(a, aux);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

class Tape;

class Var {
 public:
  Var() = default;

  double value() const;
  double adjoint() const;
  std::uint32_t index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = no_parent;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void reserve(std::size_t n) { nodes_.reserve(n); }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  const Node& node(std::size_t i) const { return nodes_.at(i); }

  /// Records a constant leaf. Leaves are the only nodes without parents, so
  /// parameters are lifted the same way and read back through adjoint().
  Var lift(double x) {
    if (!std::isfinite(x)) throw std::domain_error("cannot lift non-finite value " + std::to_string(x));
    return push(Op::constant, no_parent, no_parent, x, 0.0);
  }

  std::vector<Var> lift(std::span<const double> xs) {
    std::vector<Var> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(lift(x));
    return out;
  }

  Var apply(Op op, Var a) { return apply(op, a, Var{}, 0.0); }

  Var apply(Op op, Var a, Var b, double aux = 0.0) {
    check_operand(a);
    const bool binary = op == Op::add || op == Op::sub || op == Op::mul || op == Op::div ||
                        op == Op::min || op == Op::max;
    if (binary) {
      check_operand(b);
      if (op == Op::div && nodes_[b.index_].value == 0.0) throw std::domain_error("division by zero on tape");
    }
    const double av = nodes_[a.index_].value;
    const double bv = binary ? nodes_[b.index_].value : 0.0;
    return push(op, a.index_, binary ? b.index_ : no_parent, evaluate_op(op, av, bv, aux), aux);
  }

  /// Single reverse sweep from root. Nodes recorded after root and nodes that
  /// are not ancestors of root end with adjoint 0.
  void backward(Var root) {
    check_operand(root);
    for (auto& n : nodes_) n.adjoint = 0.0;
    nodes_[root.index_].adjoint = 1.0;
    for (std::size_t k = root.index_ + 1; k-- > 0;) {
      const Node& n = nodes_[k];
      const double g = n.adjoint;
      if (g == 0.0 || n.op == Op::constant) continue;
      const double a = nodes_[n.lhs].value;
      switch (n.op) {
        case Op::add:
          nodes_[n.lhs].adjoint += g;
          nodes_[n.rhs].adjoint += g;
          break;
        case Op::sub:
          nodes_[n.lhs].adjoint += g;
          nodes_[n.rhs].adjoint -= g;
          break;
        case Op::mul: {
          const double b = nodes_[n.rhs].value;
          nodes_[n.lhs].adjoint += g * b;
          nodes_[n.rhs].adjoint += g * a;
          break;
        }
        case Op::div: {
          const double b = nodes_[n.rhs].value;
          nodes_[n.lhs].adjoint += g / b;
          nodes_[n.rhs].adjoint -= g * a / (b * b);
          break;
        }
        case Op::neg: nodes_[n.lhs].adjoint -= g; break;
        case Op::min:
          if (a <= nodes_[n.rhs].value) nodes_[n.lhs].adjoint += g;
          else nodes_[n.rhs].adjoint += g;
          break;
        case Op::max:
          if (a >= nodes_[n.rhs].value) nodes_[n.lhs].adjoint += g;
          else nodes_[n.rhs].adjoint += g;
          break;
        case Op::abs: nodes_[n.lhs].adjoint += a >= 0.0 ? g : -g; break;
        case Op::tanh: nodes_[n.lhs].adjoint += g * (1.0 - n.value * n.value); break;
        case Op::leaky_relu: nodes_[n.lhs].adjoint += a >= 0.0 ? g : g * n.aux; break;
        case Op::sin: nodes_[n.lhs].adjoint += g * std::cos(a); break;
        case Op::cos: nodes_[n.lhs].adjoint -= g * std::sin(a); break;
        case Op::exp: nodes_[n.lhs].adjoint += g * n.value; break;
        case Op::pow_const: nodes_[n.lhs].adjoint += g * n.aux * std::pow(a, n.aux - 1.0); break;
        case Op::constant: break;
      }
    }
  }

  std::vector<double> gradient(std::span<const Var> wrt) const {
    std::vector<double> g;
    g.reserve(wrt.size());
    for (const Var& v : wrt) g.push_back(nodes_.at(v.index_).adjoint);
    return g;
  }

  /// Recomputes node i from its parents' stored values.
  double replay(std::size_t i) const {
    const Node& n = nodes_.at(i);
    if (n.op == Op::constant) return n.value;
    const double a = nodes_[n.lhs].value;
    const double b = n.rhs == no_parent ? 0.0 : nodes_[n.rhs].value;
    return evaluate_op(n.op, a, b, n.aux);
  }

 private:
  friend class Var;

  void check_operand(Var v) const {
    if (v.tape_ == nullptr) throw std::invalid_argument("operand is not attached to a tape");
    if (v.tape_ != this) throw std::invalid_argument("operands belong to different tapes");
  }

  Var push(Op op, std::uint32_t lhs, std::uint32_t rhs, double value, double aux) {
    if (nodes_.size() >= no_parent) throw std::length_error("tape is full");
    nodes_.push_back(Node{op, lhs, rhs, value, aux, 0.0});
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
};

inline double Var::value() const { return tape_->nodes_[index_].value; }
inline double Var::adjoint() const { return tape_->nodes_[index_].adjoint; }

namespace detail {
inline Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("operand is not attached to a tape");
  return *a.tape();
}
inline Var constant_like(Var like, double c) { return tape_of(like).lift(c); }
}  // namespace detail

inline Var operator+(Var a, Var b) { return detail::tape_of(a).apply(Op::add, a, b); }
inline Var operator-(Var a, Var b) { return detail::tape_of(a).apply(Op::sub, a, b); }
inline Var operator*(Var a, Var b) { return detail::tape_of(a).apply(Op::mul, a, b); }
inline Var operator/(Var a, Var b) { return detail::tape_of(a).apply(Op::div, a, b); }
inline Var operator-(Var a) { return detail::tape_of(a).apply(Op::neg, a); }

inline Var operator+(Var a, double b) { return a + detail::constant_like(a, b); }
inline Var operator-(Var a, double b) { return a - detail::constant_like(a, b); }
inline Var operator*(Var a, double b) { return a * detail::constant_like(a, b); }
inline Var operator/(Var a, double b) { return a / detail::constant_like(a, b); }
inline Var operator+(double a, Var b) { return detail::constant_like(b, a) + b; }
inline Var operator-(double a, Var b) { return detail::constant_like(b, a) - b; }
inline Var operator*(double a, Var b) { return detail::constant_like(b, a) * b; }
inline Var operator/(double a, Var b) { return detail::constant_like(b, a) / b; }

inline Var& operator+=(Var& a, Var b) { return a = a + b; }
inline Var& operator-=(Var& a, Var b) { return a = a - b; }
inline Var& operator*=(Var& a, Var b) { return a = a * b; }
inline Var& operator+=(Var& a, double b) { return a = a + b; }
inline Var& operator-=(Var& a, double b) { return a = a - b; }
inline Var& operator*=(Var& a, double b) { return a = a * b; }

// ---------------------------------------------------------------------------
// Scalar-generic functions. Double overloads mirror evaluate_op exactly.

inline double value_of(double x) { return x; }
inline double value_of(Var x) { return x.value(); }

inline double min(double a, double b) { return evaluate_op(Op::min, a, b, 0.0); }
inline double max(double a, double b) { return evaluate_op(Op::max, a, b, 0.0); }
inline double abs(double a) { return evaluate_op(Op::abs, a, 0.0, 0.0); }
inline double tanh(double a) { return std::tanh(a); }
inline double sin(double a) { return std::sin(a); }
inline double cos(double a) { return std::cos(a); }
inline double exp(double a) { return std::exp(a); }
inline double pow_const(double a, double p) { return std::pow(a, p); }
inline double leaky_relu(double a, double slope = default_leaky_slope) {
  return evaluate_op(Op::leaky_relu, a, 0.0, slope);
}

inline Var min(Var a, Var b) { return detail::tape_of(a).apply(Op::min, a, b); }
inline Var max(Var a, Var b) { return detail::tape_of(a).apply(Op::max, a, b); }
inline Var min(Var a, double b) { return min(a, detail::constant_like(a, b)); }
inline Var max(Var a, double b) { return max(a, detail::constant_like(a, b)); }
inline Var min(double a, Var b) { return min(detail::constant_like(b, a), b); }
inline Var max(double a, Var b) { return max(detail::constant_like(b, a), b); }
inline Var abs(Var a) { return detail::tape_of(a).apply(Op::abs, a); }
inline Var tanh(Var a) { return detail::tape_of(a).apply(Op::tanh, a); }
inline Var sin(Var a) { return detail::tape_of(a).apply(Op::sin, a); }
inline Var cos(Var a) { return detail::tape_of(a).apply(Op::cos, a); }
inline Var exp(Var a) { return detail::tape_of(a).apply(Op::exp, a); }
inline Var pow_const(Var a, double p) { return detail::tape_of(a).apply(Op::pow_const, a, Var{}, p); }
inline Var leaky_relu(Var a, double slope = default_leaky_slope) {
  return detail::tape_of(a).apply(Op::leaky_relu, a, Var{}, slope);
}

template <class T>
T clamp(T x, double lo, double hi) {
  return ad::min(ad::max(x, lo), hi);
}

}  // namespace advstl::ad
