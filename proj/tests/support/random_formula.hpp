#pragma once

#include <advstl/stl.hpp>

#include <random>
#include <vector>

namespace support {

using advstl::stl::Formula;

struct FormulaGen {
  std::size_t dim = 3;
  std::size_t max_depth = 3;   // operator nesting below the root
  std::size_t max_window = 8;  // largest temporal upper bound
  bool allow_truth = true;

  Formula atom(std::mt19937_64& rng) const {
    using namespace advstl::stl;
    std::uniform_int_distribution<std::size_t> comp(0, dim - 1), nterms(1, 2), kind(0, 3);
    std::uniform_real_distribution<double> coeff(-2.0, 2.0), offset(-1.0, 1.0);
    Atom a;
    const std::size_t n = nterms(rng);
    for (std::size_t i = 0; i < n; ++i) {
      // Mix the special-cased unit coefficients with general ones.
      const std::size_t k = kind(rng);
      const double c = k == 0 ? 1.0 : k == 1 ? -1.0 : coeff(rng);
      a.terms.emplace_back(comp(rng), c);
    }
    a.offset = kind(rng) == 0 ? 0.0 : offset(rng);
    a.label = "a";
    return advstl::stl::atom(std::move(a));
  }

  Formula operator()(std::mt19937_64& rng, std::size_t depth = 0) const {
    using namespace advstl::stl;
    std::uniform_int_distribution<int> op(0, 7);
    if (depth >= max_depth) return atom(rng);
    std::uniform_int_distribution<std::size_t> bound(0, max_window);
    auto interval = [&] {
      std::size_t a = bound(rng), b = bound(rng);
      if (a > b) std::swap(a, b);
      return std::pair{a, b};
    };
    switch (op(rng)) {
      case 0: return atom(rng);
      case 1: return negation((*this)(rng, depth + 1));
      case 2: return conjunction((*this)(rng, depth + 1), (*this)(rng, depth + 1));
      case 3: return disjunction((*this)(rng, depth + 1), (*this)(rng, depth + 1));
      case 4: {
        auto [a, b] = interval();
        const bool t = allow_truth && std::uniform_int_distribution<int>(0, 3)(rng) == 0;
        return until(a, b, t ? truth() : (*this)(rng, depth + 1), (*this)(rng, depth + 1));
      }
      case 5: {
        auto [a, b] = interval();
        return eventually(a, b, (*this)(rng, depth + 1));
      }
      default: {
        auto [a, b] = interval();
        return globally(a, b, (*this)(rng, depth + 1));
      }
    }
  }
};

/// Row-major states of `dim` components drawn from N(0, 1).
inline std::vector<double> random_states(std::mt19937_64& rng, std::size_t length, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(length * dim);
  for (auto& x : v) x = n(rng);
  return v;
}

inline std::vector<std::vector<double>> to_rows(const std::vector<double>& flat, std::size_t dim) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < flat.size(); i += dim) rows.emplace_back(flat.begin() + i, flat.begin() + i + dim);
  return rows;
}

}  // namespace support
