#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fshe/errors.hpp"
#include "fshe/field_sim.hpp"
#include "fshe/moments.hpp"

namespace fshe::app {

enum class Command { VerifyKernel, VerifyCorrelation, Renewal, Simulate, Moments };

std::optional<Command> parse_command(std::string_view name);
std::string to_string(Command command);

/// Every problem found in a configuration, reported together.
class ConfigError : public fshe::Error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// key = value pairs in file order; later entries override earlier ones.
struct RawConfig {
  std::vector<std::pair<std::string, std::string>> entries;
  void set(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }
};

/// Flat key=value text, one pair per line, '#' starts a comment.
RawConfig parse_config_text(std::string_view text);
RawConfig read_config_file(const std::string& path);

struct ExperimentConfig {
  Command command = Command::Simulate;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int threads = 0;

  // operator
  double alpha = 1.5;
  int dim = 1;

  // verify-kernel
  double t_min = 0.1;
  double t_max = 10.0;
  double x_max = 10.0;
  int resolution = 64;
  std::string report;  ///< CSV path; empty means <out>/kernel.csv

  // noise / correlation
  std::string kernel = "white";
  double beta = 0.5;
  double ou_exponent = 1.0;
  double radius = 1.0;

  // renewal
  double A = 1.0;
  double B = 1.0;
  double gamma = 1.0;
  double T = 1.0;
  std::string form = "constant";
  std::optional<double> mesh;  ///< default horizon / 3000
  std::optional<double> horizon;
  double cap = 1e12;
  bool trajectory = false;

  // simulate
  std::string sigma_form = "pure_power";
  double lambda = 1.0;
  std::vector<std::pair<double, double>> sigma_table;
  std::optional<double> kappa;
  std::optional<double> u0_radius;
  std::string u0_file;
  std::vector<double> u0_values;  ///< loaded from u0_file
  double L = 16.0;
  int n = 512;
  double dt = 1e-3;
  double t_end = 1.0;
  std::optional<double> trunc_N;
  std::size_t paths = 100;
  std::string domain = "free";
  std::vector<double> snapshot_times;

  // moments
  std::string experiment = "moments";
  std::vector<Point> probes;
  std::vector<ProbePair> pairs;
  std::vector<double> kappas;
  std::vector<double> horizons;
  std::vector<double> diagnostic_times;
  double threshold = 0.5;
  std::size_t bootstrap = 1000;
  double eps = 0.25;
  bool continue_after_hit = true;

  /// Resolved key = value pairs for the command (defaults filled), sorted by key.
  std::map<std::string, std::string> echo;
};

/// Parses, defaults and cross-validates `raw` for `command`. Throws
/// ConfigError listing every unknown key and every violated constraint.
ExperimentConfig validate_config(Command command, const RawConfig& raw);

/// Keys accepted by a command.
std::vector<std::string> known_keys(Command command);

/// The lattice simulation described by a simulate / moments config.
SimulationConfig to_simulation(const ExperimentConfig& config);

/// The noise kernel named by the config.
CorrelationKernel make_kernel(const ExperimentConfig& config);

}  // namespace fshe::app
