#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "config.hpp"
#include "fshe/errors.hpp"
#include "output.hpp"
#include "run.hpp"

namespace {

using fshe::app::Command;

// Subcommand flag -> config key.
struct Flag {
  const char* flag;
  const char* key;
  const char* help;
};

const std::vector<Flag> kKernelFlags = {
    {"--alpha", "alpha", "stability index in (0, 2]"},
    {"--dim", "dim", "spatial dimension 1..3"},
    {"--t-min", "t_min", "smallest grid time"},
    {"--t-max", "t_max", "largest grid time"},
    {"--x-max", "x_max", "grid half-width in x"},
    {"--resolution", "resolution", "grid points per axis"},
    {"--report", "report", "CSV output path (default <out>/kernel.csv)"},
};

const std::vector<Flag> kCorrelationFlags = {
    {"--kernel", "kernel", "riesz, expo, ou, poisson, cauchy or white"},
    {"--beta", "beta", "Riesz exponent"},
    {"--ou-exponent", "ou_exponent", "Ornstein-Uhlenbeck exponent"},
    {"--dim", "dim", "spatial dimension 1..3"},
    {"--alpha", "alpha", "stability index"},
    {"--radius", "radius", "ball radius for K_f"},
};

const std::vector<Flag> kRenewalFlags = {
    {"--A", "A", "initial level"},
    {"--B", "B", "forcing constant"},
    {"--gamma", "gamma", "nonlinearity exponent"},
    {"--alpha", "alpha", "stability index"},
    {"--T", "T", "horizon constant of the kernel"},
    {"--form", "form", "singular, power or constant"},
    {"--mesh", "mesh", "product-integration step"},
    {"--horizon", "horizon", "integration length"},
    {"--cap", "cap", "overflow level that counts as blow-up"},
};

struct Sub {
  Command command;
  CLI::App* app;
  std::vector<std::pair<const char*, std::optional<std::string>>> values;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice simulation and verification tools for fractional stochastic heat equations"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::optional<std::string> seed;
  std::optional<std::string> out;
  std::optional<std::string> threads;
  std::vector<std::string> sets;
  bool trajectory = false;
  app.add_option("--config", config_path, "flat key=value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--threads", threads, "worker threads (0 = default)");
  app.add_option("--set", sets, "override a config key: --set key=value (repeatable)");

  std::vector<Sub> subs;
  auto add = [&](Command cmd, const char* help, const std::vector<Flag>& flags) -> Sub& {
    auto* sub = app.add_subcommand(fshe::app::to_string(cmd), help);
    subs.push_back({cmd, sub, {}});
    subs.back().values.reserve(flags.size());
    for (const auto& f : flags) {
      subs.back().values.emplace_back(f.key, std::nullopt);
      sub->add_option(f.flag, subs.back().values.back().second, f.help);
    }
    return subs.back();
  };
  subs.reserve(5);
  add(Command::VerifyKernel, "two-sided heat kernel bounds, scaling and product checks", kKernelFlags);
  add(Command::VerifyCorrelation, "Dalang check and ball infimum of a correlation kernel", kCorrelationFlags);
  Sub& ren = add(Command::Renewal, "blow-up time of a renewal (Volterra) equation", kRenewalFlags);
  ren.app->add_flag("--trajectory", trajectory, "also write renewal_trajectory.csv");
  add(Command::Simulate, "Monte Carlo paths of the lattice equation (config file driven)", {});
  add(Command::Moments, "moment estimates, blow-up proxies and sweeps (config file driven)", {});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const Sub* chosen = nullptr;
  for (const auto& s : subs) {
    if (s.app->parsed()) chosen = &s;
  }

  try {
    fshe::app::RawConfig raw;
    if (config_path) raw = fshe::app::read_config_file(*config_path);
    for (const auto& [key, value] : chosen->values) {
      if (value) raw.set(key, *value);
    }
    if (trajectory) raw.set("trajectory", "true");
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw fshe::app::ConfigError({"--set expects key=value, got '" + s + "'"});
      raw.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) raw.set("seed", *seed);
    if (out) raw.set("out", *out);
    if (threads) raw.set("threads", *threads);

    const auto config = fshe::app::validate_config(chosen->command, raw);
    const auto outcome = fshe::app::run_experiment(config);
    std::cout << outcome.summary.dump(2) << "\n";
    return 0;
  } catch (const fshe::HypothesisNotMet& e) {
    std::cerr << "hypothesis not met: " << e.what() << "\n";
    return 2;
  } catch (const fshe::app::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const fshe::app::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n"
              << "artifacts written by this run were removed; no manifest was written\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n"
              << "artifacts written by this run were removed; no manifest was written\n";
    return 1;
  }
}
