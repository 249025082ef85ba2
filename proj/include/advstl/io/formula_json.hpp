#pragma once

/*!
  \file formula_json.hpp
  \brief STL formulas as JSON, with signals referenced by monitored-component name.

  Grammar (one key per object):

    "true"
    {"atom": {"terms": [["d", -1.0], ...], "offset": 1.5, "label": "..."}}
    {"le": ["d", 1.5]}              d <= 1.5
    {"ge": ["d", 1.0]}              d >= 1.0
    {"between": ["theta", -0.785, 0.785]}
    {"not": F}
    {"and": [F, F, ...]}            folded left
    {"or":  [F, F, ...]}
    {"until": {"interval": [a, b], "left": F, "right": F}}
    {"eventually": {"interval": [a, b], "arg": F}}
    {"globally":   {"interval": [a, b], "arg": F}}
*/

#include <advstl/stl.hpp>

#include <json.hpp>

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace advstl::io {

class FormulaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::size_t signal_index(const std::vector<std::string>& names, const nlohmann::json& j) {
  if (!j.is_string()) throw FormulaError("signal reference must be a string, got " + j.dump());
  const auto name = j.get<std::string>();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    std::string known;
    for (auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw FormulaError("unknown signal '" + name + "' (available: " + known + ")");
  }
  return static_cast<std::size_t>(it - names.begin());
}

inline double number(const nlohmann::json& j, const char* what) {
  if (!j.is_number()) throw FormulaError(std::string(what) + " must be a number, got " + j.dump());
  return j.get<double>();
}

inline std::pair<std::size_t, std::size_t> interval(const nlohmann::json& op) {
  if (!op.is_object() || !op.contains("interval")) throw FormulaError("temporal operator needs an interval");
  const auto& iv = op.at("interval");
  if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number_unsigned() || !iv[1].is_number_unsigned())
    throw FormulaError("interval must be [lo, hi] with non-negative integers, got " + iv.dump());
  const auto lo = iv[0].get<std::size_t>(), hi = iv[1].get<std::size_t>();
  if (lo > hi) throw FormulaError("interval " + iv.dump() + " has lo > hi");
  return {lo, hi};
}

inline void only_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
      throw FormulaError(std::string("unknown key '") + it.key() + "' in " + where);
  }
}

}  // namespace detail

inline stl::Formula formula_from_json(const nlohmann::json& j, const std::vector<std::string>& signals) {
  using namespace stl;
  using detail::number;
  using detail::signal_index;
  if (j.is_string()) {
    if (j.get<std::string>() == "true") return truth();
    throw FormulaError("unknown formula literal " + j.dump());
  }
  if (!j.is_object() || j.size() != 1) throw FormulaError("formula must be an object with exactly one operator: " + j.dump());
  const std::string op = j.begin().key();
  const auto& a = j.begin().value();

  if (op == "atom") {
    if (!a.is_object()) throw FormulaError("atom body must be an object");
    detail::only_keys(a, {"terms", "offset", "label"}, "atom");
    Atom at;
    if (!a.contains("terms") || !a.at("terms").is_array() || a.at("terms").empty())
      throw FormulaError("atom needs a non-empty terms array");
    for (const auto& t : a.at("terms")) {
      if (!t.is_array() || t.size() != 2) throw FormulaError("atom term must be [signal, coefficient]");
      at.terms.emplace_back(signal_index(signals, t[0]), number(t[1], "atom coefficient"));
    }
    if (a.contains("offset")) at.offset = number(a.at("offset"), "atom offset");
    if (a.contains("label")) at.label = a.at("label").get<std::string>();
    return atom(std::move(at));
  }
  if (op == "le" || op == "ge") {
    if (!a.is_array() || a.size() != 2) throw FormulaError(op + " takes [signal, bound]");
    const auto k = signal_index(signals, a[0]);
    const double b = number(a[1], "bound");
    const auto label = signals[k] + (op == "le" ? "<=" : ">=") + a[1].dump();
    return atom(op == "le" ? at_most(k, b, label) : at_least(k, b, label));
  }
  if (op == "between") {
    if (!a.is_array() || a.size() != 3) throw FormulaError("between takes [signal, lo, hi]");
    const auto k = signal_index(signals, a[0]);
    return box(k, number(a[1], "lower bound"), number(a[2], "upper bound"), signals[k]);
  }
  if (op == "not") return negation(formula_from_json(a, signals));
  if (op == "and" || op == "or") {
    if (!a.is_array() || a.size() < 2) throw FormulaError(op + " takes an array of at least two formulas");
    Formula acc = formula_from_json(a[0], signals);
    for (std::size_t i = 1; i < a.size(); ++i) {
      Formula next = formula_from_json(a[i], signals);
      acc = op == "and" ? conjunction(std::move(acc), std::move(next)) : disjunction(std::move(acc), std::move(next));
    }
    return acc;
  }
  if (op == "until") {
    detail::only_keys(a, {"interval", "left", "right"}, "until");
    const auto [lo, hi] = detail::interval(a);
    if (!a.contains("left") || !a.contains("right")) throw FormulaError("until needs left and right");
    return until(lo, hi, formula_from_json(a.at("left"), signals), formula_from_json(a.at("right"), signals));
  }
  if (op == "eventually" || op == "globally") {
    detail::only_keys(a, {"interval", "arg"}, op.c_str());
    const auto [lo, hi] = detail::interval(a);
    if (!a.contains("arg")) throw FormulaError(op + " needs arg");
    Formula f = formula_from_json(a.at("arg"), signals);
    return op == "eventually" ? eventually(lo, hi, std::move(f)) : globally(lo, hi, std::move(f));
  }
  throw FormulaError("unknown formula operator '" + op + "'");
}

/// Canonical form: atoms are always written in the general form and
/// conjunctions/disjunctions as binary nodes, so parsing the output rebuilds
/// the same tree.
inline nlohmann::json formula_to_json(const stl::Formula& f, const std::vector<std::string>& signals) {
  using K = stl::Formula::Kind;
  using nlohmann::json;
  auto interval = [&] { return json::array({f.lo(), f.hi()}); };
  switch (f.kind()) {
    case K::truth:
      return "true";
    case K::atom: {
      json terms = json::array();
      for (auto [k, c] : f.atom().terms) {
        if (k >= signals.size()) throw FormulaError("atom references component " + std::to_string(k) + " without a name");
        terms.push_back(json::array({signals[k], c}));
      }
      json body{{"terms", terms}, {"offset", f.atom().offset}};
      if (!f.atom().label.empty()) body["label"] = f.atom().label;
      return json{{"atom", body}};
    }
    case K::negation:
      return json{{"not", formula_to_json(f.child(), signals)}};
    case K::conjunction:
      return json{{"and", json::array({formula_to_json(f.lhs(), signals), formula_to_json(f.rhs(), signals)})}};
    case K::disjunction:
      return json{{"or", json::array({formula_to_json(f.lhs(), signals), formula_to_json(f.rhs(), signals)})}};
    case K::until:
      return json{{"until",
                   {{"interval", interval()},
                    {"left", formula_to_json(f.lhs(), signals)},
                    {"right", formula_to_json(f.rhs(), signals)}}}};
    case K::eventually:
      return json{{"eventually", {{"interval", interval()}, {"arg", formula_to_json(f.child(), signals)}}}};
    case K::globally:
      return json{{"globally", {{"interval", interval()}, {"arg", formula_to_json(f.child(), signals)}}}};
  }
  throw FormulaError("unreachable formula kind");
}

}  // namespace advstl::io
