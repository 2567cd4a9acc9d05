#pragma once

// Flat `key = value` run configuration. One entry per line, `#` starts a
// comment. Unknown and duplicate keys are rejected; every error message
// names the key involved.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "costas_lab/analysis.hpp"
#include "costas_lab/errors.hpp"
#include "costas_lab/filters.hpp"
#include "costas_lab/integrators.hpp"
#include "costas_lab/models.hpp"

namespace costas {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what) : std::runtime_error(what), key_(std::move(key)) {}
  [[nodiscard]] const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

enum class ValueType { number, integer, word, path };

struct KeySpec {
  std::string_view name;
  ValueType type;
};

inline constexpr std::array<KeySpec, 30> kConfigKeys{{
    {"model", ValueType::word},
    {"scheme", ValueType::word},
    {"dt", ValueType::number},
    {"rel_tol", ValueType::number},
    {"abs_tol", ValueType::number},
    {"max_step", ValueType::number},
    {"t_end", ValueType::number},
    {"sample_dt", ValueType::number},
    {"sample_stride", ValueType::integer},
    {"omega3", ValueType::number},
    {"lpf_gain", ValueType::number},
    {"loop_filter", ValueType::word},
    {"tau1", ValueType::number},
    {"tau2", ValueType::number},
    {"L", ValueType::number},
    {"omega1", ValueType::number},
    {"omega2_free", ValueType::number},
    {"omega_delta_free", ValueType::number},
    {"theta1_0", ValueType::number},
    {"data", ValueType::word},
    {"omega_m", ValueType::number},
    {"x", ValueType::number},
    {"x1", ValueType::number},
    {"x2", ValueType::number},
    {"theta_delta", ValueType::number},
    {"theta2", ValueType::number},
    {"output", ValueType::path},
    {"freq_tol", ValueType::number},
    {"phase_drift_tol", ValueType::number},
    {"tail_fraction", ValueType::number},
}};

inline const KeySpec* find_key(std::string_view name) {
  for (const auto& k : kConfigKeys) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_number(const std::string& key, std::string_view text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end || !std::isfinite(v)) {
    throw ConfigError(key, "key '" + key + "': not a finite number: '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace detail

/// Parsed configuration with values in canonical text form, so that
/// serialize/parse round-trips exactly.
struct RunConfig {
  std::map<std::string, std::string> values;

  bool operator==(const RunConfig&) const = default;

  [[nodiscard]] bool has(const std::string& key) const { return values.count(key) != 0; }

  void set(const std::string& key, const std::string& value) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError(key, "unknown key '" + key + "'");
    std::string v(detail::trim(value));
    if (v.empty()) throw ConfigError(key, "key '" + key + "': empty value");
    switch (spec->type) {
      case ValueType::number:
        v = detail::shortest(detail::parse_number(key, v));
        break;
      case ValueType::integer: {
        long long n = 0;
        const auto r = std::from_chars(v.data(), v.data() + v.size(), n);
        if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
          throw ConfigError(key, "key '" + key + "': not an integer: '" + v + "'");
        }
        v = std::to_string(n);
        break;
      }
      case ValueType::word:
        if (v.find_first_of(" \t#") != std::string::npos) {
          throw ConfigError(key, "key '" + key + "': value must be a single word");
        }
        break;
      case ValueType::path:
        break;
    }
    values[key] = v;
  }

  void set(const std::string& key, double value) { set(key, detail::shortest(value)); }

  [[nodiscard]] double number(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw ConfigError(key, "missing required key '" + key + "'");
    return detail::parse_number(key, it->second);
  }
  [[nodiscard]] double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  [[nodiscard]] std::string word(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw ConfigError(key, "missing required key '" + key + "'");
    return it->second;
  }
  [[nodiscard]] std::string word_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? word(key) : fallback;
  }
};

inline RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    if (!find_key(key)) {
      throw ConfigError(key, "unknown key '" + key + "' (line " + std::to_string(line_no) + ")");
    }
    if (cfg.has(key)) {
      throw ConfigError(key, "duplicate key '" + key + "' (line " + std::to_string(line_no) + ")");
    }
    cfg.set(key, std::string(line.substr(eq + 1)));
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("", "cannot read config file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

inline std::string serialize(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : cfg.values) out += k + " = " + v + "\n";
  return out;
}

// --------------------------------------------------------------------------
// Building library objects from a configuration

inline ModelKind config_model(const RunConfig& cfg) {
  const std::string m = cfg.word("model");
  const auto kind = parse_model_kind(m);
  if (!kind) throw ConfigError("model", "key 'model': unknown model '" + m + "'");
  return *kind;
}

namespace detail {

template <class F>
auto rethrow_as_config(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ParameterError& e) {
    throw ConfigError(key, "key '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline LoopParams config_params(const RunConfig& cfg) {
  const ModelKind kind = config_model(cfg);
  LoopParams p;
  if (has_lowpass_blocks(kind)) {
    const double w3 = cfg.number("omega3");
    const double gain = cfg.number_or("lpf_gain", 1.0);
    p.lpf1 = detail::rethrow_as_config("omega3", [&] { return make_first_order_lowpass(w3, gain); });
    p.lpf2 = p.lpf1;
  }
  const std::string lf = cfg.word_or("loop_filter", "pi");
  const double tau1 = cfg.number("tau1");
  const double tau2 = cfg.number_or("tau2", 0.0);
  if (lf == "pi") {
    p.loop_filter = detail::rethrow_as_config("tau1", [&] { return make_pi_loop_filter(tau1, tau2); });
  } else if (lf == "lead_lag") {
    p.loop_filter = detail::rethrow_as_config("tau1", [&] { return make_lead_lag_filter(tau1, tau2); });
  } else {
    throw ConfigError("loop_filter", "key 'loop_filter': expected 'pi' or 'lead_lag', got '" + lf + "'");
  }
  p.L = cfg.number("L");
  if (!(p.L > 0.0)) throw ConfigError("L", "key 'L': must be > 0");
  p.omega1 = cfg.number("omega1");
  if (!(p.omega1 > 0.0)) throw ConfigError("omega1", "key 'omega1': must be > 0");
  p.theta1_0 = cfg.number_or("theta1_0", 0.0);
  const bool w2 = cfg.has("omega2_free");
  const bool wd = cfg.has("omega_delta_free");
  if (w2 == wd) {
    throw ConfigError("omega2_free", "exactly one of 'omega2_free' and 'omega_delta_free' is required");
  }
  if (w2) {
    p.omega2_free = cfg.number("omega2_free");
  } else {
    p.set_omega_delta_free(cfg.number("omega_delta_free"));
  }
  const std::string data = cfg.word_or("data", "constant");
  if (data == "square") {
    const double wm = cfg.number("omega_m");
    p.data = detail::rethrow_as_config("omega_m", [&] { return DataSignal::periodic_square(wm); });
  } else if (data != "constant") {
    throw ConfigError("data", "key 'data': expected 'constant' or 'square', got '" + data + "'");
  }
  return p;
}

inline StateVector config_initial_state(const RunConfig& cfg, ModelKind kind, const LoopParams& p) {
  InitialConditions ic;
  const StateLayout l = layout(kind, p);
  auto block = [&](const char* key, std::size_t n) -> std::vector<double> {
    if (!cfg.has(key)) return {};
    if (n != 1) throw ConfigError(key, std::string("key '") + key + "': not used by model " + std::string(to_string(kind)));
    return {cfg.number(key)};
  };
  ic.x = block("x", l.n);
  if (has_lowpass_blocks(kind)) {
    ic.x1 = block("x1", l.n1);
    ic.x2 = block("x2", l.n2);
  } else {
    for (const char* k : {"x1", "x2"}) {
      if (cfg.has(k)) throw ConfigError(k, std::string("key '") + k + "': model has no low-pass filter blocks");
    }
  }
  if (cfg.has("theta_delta") && cfg.has("theta2")) {
    throw ConfigError("theta2", "keys 'theta_delta' and 'theta2' are mutually exclusive");
  }
  if (cfg.has("theta2")) {
    if (!angle_is_vco_phase(kind)) {
      throw ConfigError("theta2", "key 'theta2': model " + std::string(to_string(kind)) + " uses theta_delta");
    }
    ic.theta_delta = p.theta1_0 - cfg.number("theta2");
  } else {
    ic.theta_delta = cfg.number_or("theta_delta", 0.0);
  }
  return make_state(kind, p, ic);
}

inline IntegratorConfig config_integrator(const RunConfig& cfg) {
  const ModelKind kind = config_model(cfg);
  IntegratorConfig c;
  const std::string scheme = cfg.word_or("scheme", "fixed_rk4");
  if (scheme == "fixed_rk4") {
    c.scheme = Scheme::fixed_rk4;
    c.dt = cfg.number("dt");
  } else if (scheme == "adaptive_dp45") {
    c.scheme = Scheme::adaptive_dp45;
  } else {
    throw ConfigError("scheme", "key 'scheme': expected 'fixed_rk4' or 'adaptive_dp45', got '" + scheme + "'");
  }
  c.rel_tol = cfg.number_or("rel_tol", c.rel_tol);
  c.abs_tol = cfg.number_or("abs_tol", c.abs_tol);
  c.max_step = cfg.number_or("max_step", c.max_step);
  c.t_end = cfg.number("t_end");
  if (cfg.has("sample_dt")) {
    c.sample_dt = cfg.number("sample_dt");
  } else if (cfg.has("sample_stride")) {
    const double n = cfg.number("sample_stride");
    if (!(n >= 1.0)) throw ConfigError("sample_stride", "key 'sample_stride': must be positive");
    c.sample_stride = static_cast<std::size_t>(n);
  } else if (kind != ModelKind::ClassicPhaseSpace) {
    c.sample_dt = 2.0 * kPi / cfg.number("omega1");  // one sample per carrier period
  }
  try {
    c.validate();
  } catch (const ParameterError& e) {
    const std::string msg = e.what();
    const std::string key = msg.substr(0, msg.find(' '));
    throw ConfigError(key, "key '" + key + "': " + msg);
  }
  return c;
}

inline LockCriterion config_criterion(const RunConfig& cfg) {
  LockCriterion c;
  c.freq_tol = cfg.number_or("freq_tol", c.freq_tol);
  c.phase_drift_tol = cfg.number_or("phase_drift_tol", c.phase_drift_tol);
  c.tail_fraction = cfg.number_or("tail_fraction", c.tail_fraction);
  try {
    c.validate();
  } catch (const ParameterError& e) {
    const std::string msg = e.what();
    const std::string key = msg.substr(0, msg.find(' '));
    throw ConfigError(key, "key '" + key + "': " + msg);
  }
  return c;
}

/// Everything needed for one simulation.
struct Scenario {
  ModelKind kind{};
  LoopParams params;
  StateVector s0;
  IntegratorConfig integrator;
  LockCriterion criterion;
};

inline Scenario build_scenario(const RunConfig& cfg) {
  Scenario s;
  s.kind = config_model(cfg);
  s.params = config_params(cfg);
  s.s0 = config_initial_state(cfg, s.kind, s.params);
  s.integrator = config_integrator(cfg);
  s.criterion = config_criterion(cfg);
  return s;
}

}  // namespace costas
