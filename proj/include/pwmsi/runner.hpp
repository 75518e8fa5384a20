#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pwmsi/analysis.hpp"
#include "pwmsi/config.hpp"
#include "pwmsi/control.hpp"
#include "pwmsi/csv.hpp"
#include "pwmsi/format.hpp"
#include "pwmsi/plant.hpp"
#include "pwmsi/sim.hpp"
#include "pwmsi/svg.hpp"
#include "pwmsi/validate.hpp"

namespace pwmsi {

inline nlohmann::json to_json(const OrderReport& r) {
  nlohmann::json j;
  j["epsilons"] = r.epsilons;
  j["order_tolerance"] = OrderReport::kOrderTolerance;
  j["channels"] = nlohmann::json::array();
  for (const auto& c : r.channels) {
    j["channels"].push_back({{"name", c.name},
                             {"expected_order", c.expected_order},
                             {"errors", c.errors},
                             {"fitted_order", c.fitted_order},
                             {"flagged", c.flagged}});
  }
  return j;
}

inline std::string format_order_table(const OrderReport& r) {
  std::string out = "channel";
  out.resize(16, ' ');
  for (double e : r.epsilons) {
    std::string col = "err@" + format_double(e);
    col.resize(26, ' ');
    out += col;
  }
  out += "fitted  expected\n";
  for (const auto& c : r.channels) {
    std::string line = c.name;
    line.resize(16, ' ');
    for (double e : c.errors) {
      std::string col = format_double(e);
      col.resize(26, ' ');
      line += col;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-8.3f%-8.1f%s\n", c.fitted_order, c.expected_order, c.flagged ? "FLAGGED" : "");
    out += line + buf;
  }
  return out;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

inline std::vector<double> scaled(const std::vector<double>& v, double k) {
  std::vector<double> out(v);
  for (double& x : out) x *= k;
  return out;
}

inline std::vector<double> component(const std::vector<Vector>& v, int i) {
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k](i);
  return out;
}

}  // namespace detail

/// SVG panels of states, input, output and (for noisy runs) the noise
/// overlay. Either trace may be null; both must share a grid when given.
inline std::vector<std::filesystem::path> write_figures(const std::filesystem::path& dir, const SimTrace* actual,
                                                        const SimTrace* ideal, const RunConfig& cfg) {
  using svg::Panel;
  using svg::Series;
  const SimTrace& any = actual ? *actual : *ideal;
  const double eps = cfg.pwm.epsilon;
  const double zs = std::min(cfg.scenario.ref_step_time + 1.0, cfg.scenario.t_end - 5.0 * eps);
  const std::pair<double, double> zoom{zs, zs + 5.0 * eps};
  std::vector<std::filesystem::path> files;
  auto emit = [&](const std::string& name, const std::vector<Panel>& panels) {
    files.push_back(dir / name);
    detail::write_file(files.back(), svg::render(panels));
  };

  std::vector<Panel> states;
  for (int i = 0; i < static_cast<int>(any.x.front().size()); ++i) {
    Panel p{"x" + std::to_string(i + 1), {}, {}};
    if (i == 0) p.series.push_back({"x1ref", "#888888", any.t, any.x1ref});
    if (ideal) p.series.push_back({"averaged", "#1f77b4", ideal->t, detail::component(ideal->x, i)});
    if (actual) p.series.push_back({"switched", "#d62728", actual->t, detail::component(actual->x, i)});
    states.push_back(p);
  }
  Panel x3zoom = states.back();
  x3zoom.title += " (zoom)";
  x3zoom.x_range = zoom;
  states.push_back(x3zoom);
  emit("fig_states.svg", states);

  std::vector<Panel> input{{"u", {}, {}}, {"u, u_pwm (zoom)", {}, zoom}};
  if (actual) {
    input[0].series.push_back({"u", "#d62728", actual->t, actual->u});
    input[1].series.push_back({"u_pwm", "#2ca02c", actual->t, actual->u_pwm});
    input[1].series.push_back({"u", "#d62728", actual->t, actual->u});
  }
  if (ideal) input[0].series.push_back({"averaged u", "#1f77b4", ideal->t, ideal->u});
  emit("fig_input.svg", input);

  std::vector<Panel> output{{"y", {}, {}}, {"y (zoom)", {}, zoom}};
  for (auto& p : output) {
    if (ideal) p.series.push_back({"averaged", "#1f77b4", ideal->t, ideal->y});
    if (actual) {
      p.series.push_back({"switched", "#d62728", actual->t, actual->y});
      p.series.push_back({"yhat_a", "#9467bd", actual->t, actual->yhat_a});
    }
  }
  emit("fig_output.svg", output);

  if (actual && cfg.sim.noise_enabled) {
    std::vector<Panel> noise{{"y with noise (zoom)", {}, zoom}, {"x1 and yhat_v / eps", {}, {}}};
    noise[0].series.push_back({"y_noisy", "#ff7f0e", actual->t, actual->y_noisy});
    noise[0].series.push_back({"y", "#d62728", actual->t, actual->y});
    noise[1].series.push_back({"yhat_v / eps", "#ff7f0e", actual->t, detail::scaled(actual->yhat_v, 1.0 / eps)});
    noise[1].series.push_back({"x1", "#d62728", actual->t, detail::component(actual->x, 0)});
    noise[1].series.push_back({"x1ref", "#888888", actual->t, actual->x1ref});
    emit("fig_noise.svg", noise);
  }
  return files;
}

/// Executes cfg.mode for the triple-integrator example and writes its outputs
/// into cfg.out_dir. Returns the process exit status (nonzero when a
/// validation check fails); I/O and simulation failures throw.
inline int run(const RunConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  validate_config(cfg);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  const SisoPlant plant = triple_integrator();
  const ControllerObserver co = build_paper_controller();

  auto write_csv = [&](const std::string& name, const SimTrace& tr, const SimTrace* averaged) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + (dir / name).string() + " for writing");
    write_trace_csv(f, tr, plant, cfg.pwm, averaged);
    if (!f) throw std::runtime_error("write failed for " + (dir / name).string());
    log << "wrote " << (dir / name).string() << " (" << tr.size() << " rows)\n";
  };
  auto with_context = [](const char* what, auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(what) + ": " + e.what());
    }
  };

  switch (cfg.mode) {
    case RunMode::kActual: {
      const SimTrace tr =
          with_context("switched run", [&] { return simulate_actual(plant, co, cfg.pwm, cfg.sim, cfg.scenario); });
      write_csv("actual.csv", tr, nullptr);
      if (cfg.plots) write_figures(dir, &tr, nullptr, cfg);
      return 0;
    }
    case RunMode::kIdeal: {
      const SimTrace tr =
          with_context("averaged run", [&] { return simulate_ideal(plant, co, cfg.pwm, cfg.sim, cfg.scenario); });
      write_csv("ideal.csv", tr, nullptr);
      if (cfg.plots) write_figures(dir, nullptr, &tr, cfg);
      return 0;
    }
    case RunMode::kBoth: {
      const SimTrace act =
          with_context("switched run", [&] { return simulate_actual(plant, co, cfg.pwm, cfg.sim, cfg.scenario); });
      const SimTrace avg =
          with_context("averaged run", [&] { return simulate_ideal(plant, co, cfg.pwm, cfg.sim, cfg.scenario); });
      write_csv("both.csv", act, &avg);
      if (cfg.plots) write_figures(dir, &act, &avg, cfg);
      return 0;
    }
    case RunMode::kSweep: {
      auto factory = [&](double eps) {
        PwmConfig pwm = cfg.pwm;
        pwm.epsilon = eps;
        SimConfig sim = cfg.sim;
        sim.noise_sample_time = std::min(sim.noise_sample_time, eps / 10.0);
        return with_context("sweep run", [&] {
          return simulate_deviations(plant, co, pwm, sim, cfg.scenario, default_window(cfg.scenario, pwm));
        });
      };
      const OrderReport report = convergence_order(factory, cfg.sweep_epsilons);
      detail::write_file(dir / "order_report.json", to_json(report).dump(2) + "\n");
      log << format_order_table(report);
      log << "wrote " << (dir / "order_report.json").string() << "\n";
      return 0;
    }
    case RunMode::kValidate: {
      const auto results = run_validation(cfg.pwm, cfg.sim, cfg.scenario);
      bool all = true;
      for (const auto& r : results) {
        log << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        all = all && r.passed;
      }
      return all ? 0 : 1;
    }
  }
  return 2;
}

}  // namespace pwmsi
