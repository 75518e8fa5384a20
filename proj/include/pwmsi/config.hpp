#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pwmsi/control.hpp"
#include "pwmsi/demod.hpp"
#include "pwmsi/format.hpp"
#include "pwmsi/pwm.hpp"
#include "pwmsi/sim.hpp"

namespace pwmsi {

enum class RunMode { kActual, kIdeal, kBoth, kSweep, kValidate };

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::kActual: return "actual";
    case RunMode::kIdeal: return "ideal";
    case RunMode::kBoth: return "both";
    case RunMode::kSweep: return "sweep";
    case RunMode::kValidate: return "validate";
  }
  return "both";
}

inline std::optional<RunMode> parse_run_mode(std::string_view s) {
  for (RunMode m : {RunMode::kActual, RunMode::kIdeal, RunMode::kBoth, RunMode::kSweep, RunMode::kValidate}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

struct RunConfig {
  PwmConfig pwm;
  SimConfig sim;
  Scenario scenario;
  RunMode mode = RunMode::kBoth;
  std::string out_dir = "out";
  bool plots = false;
  std::vector<double> sweep_epsilons{1e-3, 5e-4, 2.5e-4};
};

inline bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.pwm.epsilon == b.pwm.epsilon && a.pwm.u_m == b.pwm.u_m &&
         a.sim.substeps_per_period == b.sim.substeps_per_period && a.sim.event_tolerance == b.sim.event_tolerance &&
         a.sim.noise_enabled == b.sim.noise_enabled && a.sim.noise_power_density == b.sim.noise_power_density &&
         a.sim.noise_sample_time == b.sim.noise_sample_time && a.sim.rng_seed == b.sim.rng_seed &&
         a.sim.demod.normalizer == b.sim.demod.normalizer &&
         a.sim.demod.guard_fraction == b.sim.demod.guard_fraction &&
         a.scenario.d_step_time == b.scenario.d_step_time && a.scenario.d_value == b.scenario.d_value &&
         a.scenario.ref_step_time == b.scenario.ref_step_time &&
         a.scenario.ref_amplitude == b.scenario.ref_amplitude &&
         a.scenario.ref_filter_time_constant == b.scenario.ref_filter_time_constant &&
         a.scenario.t_end == b.scenario.t_end && a.mode == b.mode && a.out_dir == b.out_dir &&
         a.plots == b.plots && a.sweep_epsilons == b.sweep_epsilons;
}

/// Parse failure anchored at a 1-based line (0 when the offending value came
/// from a default).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& msg)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view key, std::string_view v, int line) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError(line, std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

template <class Int>
Int parse_int(std::string_view key, std::string_view v, int line) {
  Int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError(line, std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view v, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(line, std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

struct Field {
  std::function<void(RunConfig&, std::string_view, int)> parse;
  std::function<std::string(const RunConfig&)> format;
};

inline const std::vector<std::pair<std::string, Field>>& fields() {
  using S = std::string_view;
  static const std::vector<std::pair<std::string, Field>> table{
      {"epsilon",
       {[](RunConfig& c, S v, int l) { c.pwm.epsilon = parse_double("epsilon", v, l); },
        [](const RunConfig& c) { return format_double(c.pwm.epsilon); }}},
      {"u_m",
       {[](RunConfig& c, S v, int l) { c.pwm.u_m = parse_double("u_m", v, l); },
        [](const RunConfig& c) { return format_double(c.pwm.u_m); }}},
      {"substeps_per_period",
       {[](RunConfig& c, S v, int l) { c.sim.substeps_per_period = parse_int<int>("substeps_per_period", v, l); },
        [](const RunConfig& c) { return std::to_string(c.sim.substeps_per_period); }}},
      {"event_tolerance",
       {[](RunConfig& c, S v, int l) { c.sim.event_tolerance = parse_double("event_tolerance", v, l); },
        [](const RunConfig& c) { return format_double(c.sim.event_tolerance); }}},
      {"noise_enabled",
       {[](RunConfig& c, S v, int l) { c.sim.noise_enabled = parse_bool("noise_enabled", v, l); },
        [](const RunConfig& c) { return std::string(c.sim.noise_enabled ? "true" : "false"); }}},
      {"noise_power_density",
       {[](RunConfig& c, S v, int l) { c.sim.noise_power_density = parse_double("noise_power_density", v, l); },
        [](const RunConfig& c) { return format_double(c.sim.noise_power_density); }}},
      {"noise_sample_time",
       {[](RunConfig& c, S v, int l) { c.sim.noise_sample_time = parse_double("noise_sample_time", v, l); },
        [](const RunConfig& c) { return format_double(c.sim.noise_sample_time); }}},
      {"rng_seed",
       {[](RunConfig& c, S v, int l) { c.sim.rng_seed = parse_int<std::uint64_t>("rng_seed", v, l); },
        [](const RunConfig& c) { return std::to_string(c.sim.rng_seed); }}},
      {"normalizer",
       {[](RunConfig& c, S v, int l) {
          if (v == "grid") {
            c.sim.demod.normalizer = Normalizer::kGrid;
          } else if (v == "closed_form") {
            c.sim.demod.normalizer = Normalizer::kClosedForm;
          } else {
            throw ConfigError(l, "normalizer: expected grid or closed_form, got '" + std::string(v) + "'");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.sim.demod.normalizer == Normalizer::kGrid ? "grid" : "closed_form");
        }}},
      {"guard_fraction",
       {[](RunConfig& c, S v, int l) { c.sim.demod.guard_fraction = parse_double("guard_fraction", v, l); },
        [](const RunConfig& c) { return format_double(c.sim.demod.guard_fraction); }}},
      {"d_step_time",
       {[](RunConfig& c, S v, int l) { c.scenario.d_step_time = parse_double("d_step_time", v, l); },
        [](const RunConfig& c) { return format_double(c.scenario.d_step_time); }}},
      {"d_value",
       {[](RunConfig& c, S v, int l) { c.scenario.d_value = parse_double("d_value", v, l); },
        [](const RunConfig& c) { return format_double(c.scenario.d_value); }}},
      {"ref_step_time",
       {[](RunConfig& c, S v, int l) { c.scenario.ref_step_time = parse_double("ref_step_time", v, l); },
        [](const RunConfig& c) { return format_double(c.scenario.ref_step_time); }}},
      {"ref_amplitude",
       {[](RunConfig& c, S v, int l) { c.scenario.ref_amplitude = parse_double("ref_amplitude", v, l); },
        [](const RunConfig& c) { return format_double(c.scenario.ref_amplitude); }}},
      {"ref_filter_time_constant",
       {[](RunConfig& c, S v, int l) {
          c.scenario.ref_filter_time_constant = parse_double("ref_filter_time_constant", v, l);
        },
        [](const RunConfig& c) { return format_double(c.scenario.ref_filter_time_constant); }}},
      {"t_end",
       {[](RunConfig& c, S v, int l) { c.scenario.t_end = parse_double("t_end", v, l); },
        [](const RunConfig& c) { return format_double(c.scenario.t_end); }}},
      {"mode",
       {[](RunConfig& c, S v, int l) {
          const auto m = parse_run_mode(v);
          if (!m) throw ConfigError(l, "mode: expected actual, ideal, both, sweep or validate");
          c.mode = *m;
        },
        [](const RunConfig& c) { return to_string(c.mode); }}},
      {"out_dir",
       {[](RunConfig& c, S v, int l) {
          if (v.empty()) throw ConfigError(l, "out_dir must not be empty");
          c.out_dir = std::string(v);
        },
        [](const RunConfig& c) { return c.out_dir; }}},
      {"plots",
       {[](RunConfig& c, S v, int l) { c.plots = parse_bool("plots", v, l); },
        [](const RunConfig& c) { return std::string(c.plots ? "true" : "false"); }}},
      {"sweep_epsilons",
       {[](RunConfig& c, S v, int l) {
          c.sweep_epsilons.clear();
          std::size_t pos = 0;
          while (pos <= v.size()) {
            const auto comma = v.find(',', pos);
            const auto item = trim(v.substr(pos, comma == S::npos ? S::npos : comma - pos));
            c.sweep_epsilons.push_back(parse_double("sweep_epsilons", item, l));
            if (comma == S::npos) break;
            pos = comma + 1;
          }
        },
        [](const RunConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.sweep_epsilons.size(); ++i) {
            if (i) out += ", ";
            out += format_double(c.sweep_epsilons[i]);
          }
          return out;
        }}},
  };
  return table;
}

}  // namespace detail

/// Checks every constraint, naming the field and the line it came from.
inline void validate_config(const RunConfig& c, const std::map<std::string, int>& lines = {}) {
  auto fail = [&](const std::string& key, const std::string& msg) {
    const auto it = lines.find(key);
    throw ConfigError(it == lines.end() ? 0 : it->second, key + " " + msg);
  };
  auto positive = [&](const std::string& key, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(key, "must be a finite number > 0");
  };
  positive("epsilon", c.pwm.epsilon);
  positive("u_m", c.pwm.u_m);
  if (c.sim.substeps_per_period < 8) fail("substeps_per_period", "must be >= 8");
  if (!(c.sim.event_tolerance > 0.0 && c.sim.event_tolerance < 1e-2)) fail("event_tolerance", "must be in (0, 1e-2)");
  if (!(c.sim.noise_power_density >= 0.0) || !std::isfinite(c.sim.noise_power_density)) {
    fail("noise_power_density", "must be a finite number >= 0");
  }
  positive("noise_sample_time", c.sim.noise_sample_time);
  if (c.sim.noise_enabled && c.sim.noise_sample_time > c.pwm.epsilon / 10.0 * (1.0 + 1e-12)) {
    fail("noise_sample_time", "must be <= epsilon / 10 when noise is enabled");
  }
  if (!(c.sim.demod.guard_fraction >= 0.0 && c.sim.demod.guard_fraction < 1.0)) {
    fail("guard_fraction", "must be in [0, 1)");
  }
  if (!(c.scenario.d_step_time >= 0.0) || !std::isfinite(c.scenario.d_step_time)) {
    fail("d_step_time", "must be a finite number >= 0");
  }
  if (!std::isfinite(c.scenario.d_value)) fail("d_value", "must be finite");
  if (!(c.scenario.ref_step_time > c.scenario.d_step_time) || !std::isfinite(c.scenario.ref_step_time)) {
    fail("ref_step_time", "must be finite and exceed d_step_time");
  }
  if (!std::isfinite(c.scenario.ref_amplitude)) fail("ref_amplitude", "must be finite");
  if (!(c.scenario.ref_filter_time_constant >= 0.0) || !std::isfinite(c.scenario.ref_filter_time_constant)) {
    fail("ref_filter_time_constant", "must be a finite number >= 0");
  }
  if (!(c.scenario.t_end > c.scenario.ref_step_time) || !std::isfinite(c.scenario.t_end)) {
    fail("t_end", "must be finite and exceed ref_step_time");
  }
  if (c.sweep_epsilons.size() < 3) fail("sweep_epsilons", "needs at least three values");
  for (std::size_t i = 0; i < c.sweep_epsilons.size(); ++i) {
    if (!(c.sweep_epsilons[i] > 0.0)) fail("sweep_epsilons", "values must be > 0");
    if (i > 0 && !(c.sweep_epsilons[i] < c.sweep_epsilons[i - 1])) {
      fail("sweep_epsilons", "values must be strictly decreasing");
    }
  }
}

/// Parses flat `key = value` text. Blank lines and lines starting with '#'
/// are ignored; missing keys keep their defaults.
inline RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::map<std::string, int> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;

    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const auto value = detail::trim(line.substr(eq + 1));

    const auto& table = detail::fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw ConfigError(line_no, "unknown key '" + key + "'");
    if (seen.count(key)) throw ConfigError(line_no, "duplicate key '" + key + "'");
    seen[key] = line_no;
    it->second.parse(cfg, value, line_no);
  }
  validate_config(cfg, seen);
  return cfg;
}

/// Every field as `key = value`, one per line; parse_config reads it back to an
/// equal RunConfig.
inline std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : detail::fields()) out += key + " = " + field.format(cfg) + "\n";
  return out;
}

}  // namespace pwmsi
