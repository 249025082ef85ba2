#pragma once

/*!
  \file random.hpp
  \brief Seed derivation and initial-state sampling.

  Every random consumer gets its own stream derived from the root seed and a
  fixed label, so adding a consumer never shifts the draws of the others.
*/

#include <advstl/sim.hpp>

#include <bit>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace advstl {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ fnv1a(label)) + index);
}

/// Per-variable uniform ranges, in the order of SystemModel::initial_variables().
class InitialStateSampler {
 public:
  InitialStateSampler() = default;
  InitialStateSampler(std::vector<std::string> names, std::vector<std::pair<double, double>> ranges)
      : names_(std::move(names)), ranges_(std::move(ranges)) {
    if (names_.size() != ranges_.size()) throw std::invalid_argument("sampler names and ranges differ in size");
    for (std::size_t i = 0; i < ranges_.size(); ++i)
      if (!(ranges_[i].first <= ranges_[i].second))
        throw std::invalid_argument("initial range for '" + names_[i] + "' has lo > hi");
  }

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::pair<double, double>>& ranges() const { return ranges_; }

  void check(const sim::SystemModel& m) const {
    if (names_ != m.initial_variables()) {
      std::string want;
      for (auto& n : m.initial_variables()) want += (want.empty() ? "" : ", ") + n;
      throw std::invalid_argument("initial-state sampler must list exactly: " + want);
    }
  }

  template <class Rng>
  std::vector<double> sample(const sim::SystemModel& m, Rng& rng) const {
    check(m);
    std::vector<double> v;
    v.reserve(ranges_.size());
    for (auto [lo, hi] : ranges_) {
      if (lo == hi) {
        v.push_back(lo);
        continue;
      }
      std::uniform_real_distribution<double> u(lo, hi);
      v.push_back(u(rng));
    }
    return m.make_initial_state(v);
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::pair<double, double>> ranges_;
};

}  // namespace advstl
