#pragma once

/*!
  \file weights.hpp
  \brief Versioned network weight files.

  A weight file records the network role, layer widths, activation, output
  bounds, the flat parameter vector and the hash of the experiment config
  it was trained under. Parameters are written in shortest round-trip form,
  so save/load reproduces every bit.
*/

#include <advstl/io/config.hpp>
#include <advstl/policy.hpp>

#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace advstl::io {

inline constexpr int weight_format_version = 1;

class WeightError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct WeightFile {
  std::string role;  // "attacker" or "defender"
  policy::MlpSpec spec;
  std::vector<double> params;
  std::string config_hash;
  std::int64_t created = 0;  // seconds since the epoch
};

/// SOURCE_DATE_EPOCH when set, else 0, so repeated runs write identical bytes.
inline std::int64_t reproducible_timestamp() {
  if (const char* s = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      return std::stoll(s);
    } catch (const std::exception&) {
      return 0;
    }
  }
  return 0;
}

inline json to_json(const WeightFile& w) {
  const auto widths = w.spec.widths();
  return {{"format", "advstl-weights"},
          {"version", weight_format_version},
          {"role", w.role},
          {"layers", widths},
          {"activation", "leaky_relu"},
          {"leaky_slope", w.spec.leaky_slope},
          {"output", "tanh_scaled"},
          {"out_lo", w.spec.out_lo},
          {"out_hi", w.spec.out_hi},
          {"config_hash", w.config_hash},
          {"created", w.created},
          {"params", w.params}};
}

inline WeightFile weights_from_json(const json& j) {
  auto need = [&](const char* k) -> const json& {
    if (!j.contains(k)) throw WeightError(std::string("weight file lacks '") + k + "'");
    return j.at(k);
  };
  try {
    if (!j.is_object() || need("format") != "advstl-weights") throw WeightError("not an advstl weight file");
    if (need("version") != weight_format_version)
      throw WeightError("unsupported weight file version " + need("version").dump());
    if (need("activation") != "leaky_relu" || need("output") != "tanh_scaled")
      throw WeightError("unsupported activation or output squashing");
    WeightFile w;
    w.role = need("role").get<std::string>();
    if (w.role != "attacker" && w.role != "defender") throw WeightError("unknown network role '" + w.role + "'");
    const auto layers = need("layers").get<std::vector<std::size_t>>();
    if (layers.size() < 2) throw WeightError("weight file needs at least input and output layers");
    w.spec.inputs = layers.front();
    w.spec.hidden.assign(layers.begin() + 1, layers.end() - 1);
    w.spec.out_lo = need("out_lo").get<std::vector<double>>();
    w.spec.out_hi = need("out_hi").get<std::vector<double>>();
    w.spec.leaky_slope = need("leaky_slope").get<double>();
    if (w.spec.out_lo.size() != layers.back()) throw WeightError("output bounds do not match the output layer");
    w.spec.validate();
    w.params = need("params").get<std::vector<double>>();
    if (w.params.size() != w.spec.param_count())
      throw WeightError("weight file has " + std::to_string(w.params.size()) + " parameters, architecture needs " +
                        std::to_string(w.spec.param_count()));
    w.config_hash = need("config_hash").get<std::string>();
    w.created = need("created").get<std::int64_t>();
    return w;
  } catch (const json::exception& e) {
    throw WeightError(std::string("malformed weight file: ") + e.what());
  } catch (const WeightError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw WeightError(std::string("invalid weight file: ") + e.what());
  }
}

inline void save_weights(const std::string& path, const WeightFile& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << to_json(w).dump(1) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline WeightFile load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightError("cannot open weight file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw WeightError("weight file '" + path + "' is not valid JSON: " + e.what());
  }
  return weights_from_json(j);
}

/// Checks a loaded file against the role, architecture and config it is used with.
inline policy::Policy checked_policy(const WeightFile& w, const std::string& role, const policy::MlpSpec& expected,
                                     const std::string& expected_hash) {
  if (w.role != role) throw WeightError("expected " + role + " weights, file holds " + w.role + " weights");
  if (!(w.spec == expected)) throw WeightError(role + " weights do not match the configured architecture");
  if (w.config_hash != expected_hash)
    throw WeightError(role + " weights were trained under config " + w.config_hash + ", current config is " +
                      expected_hash);
  return policy::Policy(policy::Mlp(w.spec), w.params);
}

}  // namespace advstl::io
