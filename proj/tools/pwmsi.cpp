#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pwmsi/config.hpp"
#include "pwmsi/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"PWM-induced signal injection: switched and averaged closed-loop simulation"};
  std::string config_path, mode, out_dir;
  std::uint64_t seed = 0;
  bool noise = false, plots = false;
  app.add_option("--config", config_path, "flat key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--mode", mode, "run mode")->check(CLI::IsMember({"actual", "ideal", "both", "sweep", "validate"}));
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "noise RNG seed");
  app.add_flag("--noise", noise, "add band-limited measurement noise");
  app.add_flag("--plots", plots, "also write SVG figures");
  CLI11_PARSE(app, argc, argv);

  try {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      std::ostringstream ss;
      ss << f.rdbuf();
      text = ss.str();
    }
    pwmsi::RunConfig cfg = pwmsi::parse_config(text);
    if (!mode.empty()) cfg.mode = *pwmsi::parse_run_mode(mode);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (*seed_opt) cfg.sim.rng_seed = seed;
    if (noise) cfg.sim.noise_enabled = true;
    if (plots) cfg.plots = true;
    return pwmsi::run(cfg, std::cout);
  } catch (const pwmsi::ConfigError& e) {
    std::cerr << (config_path.empty() ? "config" : config_path) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
