#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fshe::app {

namespace {

constexpr unsigned kKernel = 1u << 0;
constexpr unsigned kCorrelation = 1u << 1;
constexpr unsigned kRenewal = 1u << 2;
constexpr unsigned kSimulate = 1u << 3;
constexpr unsigned kMoments = 1u << 4;
constexpr unsigned kAll = kKernel | kCorrelation | kRenewal | kSimulate | kMoments;
constexpr unsigned kSim = kSimulate | kMoments;

struct KeyInfo {
  const char* name;
  unsigned commands;
};

constexpr KeyInfo kKeys[] = {
    {"seed", kAll},           {"threads", kAll},
    {"out", kAll},            {"alpha", kAll},
    {"dim", kKernel | kCorrelation | kSim},
    {"t_min", kKernel},       {"t_max", kKernel},
    {"x_max", kKernel},       {"resolution", kKernel},
    {"report", kKernel},      {"kernel", kCorrelation | kSim},
    {"beta", kCorrelation | kSim},
    {"ou_exponent", kCorrelation | kSim},
    {"radius", kCorrelation | kSim},
    {"A", kRenewal},          {"B", kRenewal},
    {"gamma", kRenewal | kSim},
    {"T", kRenewal},          {"form", kRenewal},
    {"mesh", kRenewal},       {"horizon", kRenewal},
    {"cap", kRenewal},        {"trajectory", kRenewal},
    {"sigma_form", kSim},     {"lambda", kSim},
    {"sigma_table", kSim},    {"kappa", kSim},
    {"u0_radius", kSim},      {"u0_file", kSim},
    {"L", kSim},              {"n", kSim},
    {"dt", kSim},             {"t_end", kSim},
    {"trunc_N", kSim},        {"paths", kSim},
    {"domain", kSim},         {"snapshot_times", kSim},
    {"experiment", kMoments}, {"probes", kMoments},
    {"pairs", kMoments},      {"kappas", kMoments},
    {"horizons", kMoments},   {"diagnostic_times", kMoments},
    {"threshold", kMoments},  {"bootstrap", kMoments},
    {"eps", kMoments},        {"continue_after_hit", kMoments},
};

unsigned bit(Command c) {
  switch (c) {
    case Command::VerifyKernel: return kKernel;
    case Command::VerifyCorrelation: return kCorrelation;
    case Command::Renewal: return kRenewal;
    case Command::Simulate: return kSimulate;
    case Command::Moments: return kMoments;
  }
  return 0;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

std::string join_numbers(const std::vector<double>& v, const char* sep = ",") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += format_number(v[i]);
  }
  return s;
}

std::string format_point(const Point& p, int dim) {
  std::string s;
  for (int j = 0; j < dim; ++j) {
    if (j) s += ",";
    s += format_number(p[static_cast<std::size_t>(j)]);
  }
  return s;
}

bool parse_double_text(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size() && std::isfinite(out);
}

// Reads typed values out of the key map, recording every failure and the
// resolved value of each key in the echo.
class Reader {
 public:
  Reader(const std::map<std::string, std::string>& values, std::vector<std::string>& errors,
         std::map<std::string, std::string>& echo)
      : values_(values), errors_(errors), echo_(echo) {}

  const std::string* find(const char* key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }

  void real(const char* key, double& target) {
    if (const auto* s = find(key)) {
      if (!parse_double_text(*s, target)) bad(key, *s, "a finite number");
      echo_[key] = *s;
    } else {
      echo_[key] = format_number(target);
    }
  }

  void optional_real(const char* key, std::optional<double>& target) {
    if (const auto* s = find(key)) {
      double v = 0.0;
      if (parse_double_text(*s, v)) {
        target = v;
      } else {
        bad(key, *s, "a finite number");
      }
      echo_[key] = *s;
    }
  }

  template <class I>
  void integer(const char* key, I& target) {
    if (const auto* s = find(key)) {
      long long v = 0;
      std::size_t used = 0;
      bool ok = !s->empty();
      try {
        v = std::stoll(*s, &used);
      } catch (const std::exception&) {
        ok = false;
      }
      ok = ok && used == s->size();
      if (ok && std::is_unsigned_v<I> && v < 0) ok = false;
      if (ok) {
        target = static_cast<I>(v);
      } else {
        bad(key, *s, std::is_unsigned_v<I> ? "a nonnegative integer" : "an integer");
      }
      echo_[key] = *s;
    } else {
      echo_[key] = std::to_string(target);
    }
  }

  void text(const char* key, std::string& target) {
    if (const auto* s = find(key)) target = *s;
    echo_[key] = target;
  }

  void choice(const char* key, std::string& target, std::initializer_list<const char*> allowed) {
    text(key, target);
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return target == a; })) {
      std::string list;
      for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      errors_.push_back(std::string(key) + ": '" + target + "' is not one of {" + list + "}");
    }
  }

  void boolean(const char* key, bool& target) {
    if (const auto* s = find(key)) {
      if (*s == "true" || *s == "1" || *s == "yes") {
        target = true;
      } else if (*s == "false" || *s == "0" || *s == "no") {
        target = false;
      } else {
        bad(key, *s, "true or false");
      }
    }
    echo_[key] = target ? "true" : "false";
  }

  void list(const char* key, std::vector<double>& target) {
    const auto* s = find(key);
    if (!s) return;
    echo_[key] = *s;
    target.clear();
    if (trim(*s).empty()) return;
    for (const auto& part : split(*s, ',')) {
      double v = 0.0;
      if (!parse_double_text(part, v)) {
        bad(key, *s, "a comma-separated list of numbers");
        target.clear();
        return;
      }
      target.push_back(v);
    }
  }

  bool point(const char* key, const std::string& text, int dim, Point& out) {
    const auto coords = split(text, ',');
    if (static_cast<int>(coords.size()) != dim) {
      errors_.push_back(std::string(key) + ": point '" + text + "' needs " + std::to_string(dim) +
                        " coordinate(s)");
      return false;
    }
    out = Point{};
    for (std::size_t j = 0; j < coords.size(); ++j) {
      if (!parse_double_text(coords[j], out[j])) {
        bad(key, text, "a point with numeric coordinates");
        return false;
      }
    }
    return true;
  }

  void points(const char* key, int dim, std::vector<Point>& target) {
    const auto* s = find(key);
    if (!s) return;
    echo_[key] = *s;
    target.clear();
    if (trim(*s).empty()) return;
    for (const auto& part : split(*s, ';')) {
      Point p{};
      if (!point(key, part, dim, p)) return;
      target.push_back(p);
    }
  }

  void pairs(const char* key, int dim, std::vector<ProbePair>& target) {
    const auto* s = find(key);
    if (!s) return;
    echo_[key] = *s;
    target.clear();
    if (trim(*s).empty()) return;
    for (const auto& part : split(*s, ';')) {
      const auto ends = split(part, '|');
      if (ends.size() != 2) {
        bad(key, part, "a pair written x|y");
        return;
      }
      ProbePair pr;
      if (!point(key, ends[0], dim, pr.x) || !point(key, ends[1], dim, pr.y)) return;
      target.push_back(pr);
    }
  }

  void table(const char* key, std::vector<std::pair<double, double>>& target) {
    const auto* s = find(key);
    if (!s) return;
    echo_[key] = *s;
    target.clear();
    for (const auto& part : split(*s, ';')) {
      const auto uv = split(part, ':');
      double u = 0.0;
      double v = 0.0;
      if (uv.size() != 2 || !parse_double_text(uv[0], u) || !parse_double_text(uv[1], v)) {
        bad(key, part, "entries written u:sigma separated by ';'");
        target.clear();
        return;
      }
      target.emplace_back(u, v);
    }
  }

  void violation(std::string message) { errors_.push_back(std::move(message)); }

 private:
  void bad(const char* key, const std::string& value, const char* expected) {
    errors_.push_back(std::string(key) + ": '" + value + "' is not " + expected);
  }

  const std::map<std::string, std::string>& values_;
  std::vector<std::string>& errors_;
  std::map<std::string, std::string>& echo_;
};

bool power_of_two(long long n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<double> load_values(const std::string& path, std::vector<std::string>& errors) {
  std::ifstream in(path);
  if (!in) {
    errors.push_back("u0_file: cannot open '" + path + "'");
    return {};
  }
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    double v = 0.0;
    if (!parse_double_text(t, v)) {
      errors.push_back("u0_file: line " + std::to_string(line_no) + " is not a finite number");
      return {};
    }
    values.push_back(v);
  }
  return values;
}

void check_increasing(Reader& r, const char* key, const std::vector<double>& v, bool strictly) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (strictly ? !(v[i] > v[i - 1]) : !(v[i] >= v[i - 1])) {
      r.violation(std::string(key) + " must be " + (strictly ? "strictly increasing" : "nondecreasing"));
      return;
    }
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : fshe::Error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& v : violations) msg += "\n  - " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

std::optional<Command> parse_command(std::string_view name) {
  if (name == "verify-kernel") return Command::VerifyKernel;
  if (name == "verify-correlation") return Command::VerifyCorrelation;
  if (name == "renewal") return Command::Renewal;
  if (name == "simulate") return Command::Simulate;
  if (name == "moments") return Command::Moments;
  return std::nullopt;
}

std::string to_string(Command command) {
  switch (command) {
    case Command::VerifyKernel: return "verify-kernel";
    case Command::VerifyCorrelation: return "verify-correlation";
    case Command::Renewal: return "renewal";
    case Command::Simulate: return "simulate";
    case Command::Moments: return "moments";
  }
  return "unknown";
}

RawConfig parse_config_text(std::string_view text) {
  RawConfig raw;
  std::vector<std::string> errors;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(line.substr(0, hash));
    if (!body.empty()) {
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
      } else {
        std::string key = trim(std::string_view(body).substr(0, eq));
        if (key.empty()) {
          errors.push_back("line " + std::to_string(line_no) + ": empty key");
        } else {
          raw.set(std::move(key), trim(std::string_view(body).substr(eq + 1)));
        }
      }
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return raw;
}

RawConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::vector<std::string> known_keys(Command command) {
  std::vector<std::string> keys;
  for (const auto& k : kKeys) {
    if (k.commands & bit(command)) keys.emplace_back(k.name);
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

ExperimentConfig validate_config(Command command, const RawConfig& raw) {
  std::vector<std::string> errors;
  std::map<std::string, std::string> values;
  for (const auto& [key, value] : raw.entries) {
    const auto* info = std::find_if(std::begin(kKeys), std::end(kKeys),
                                    [&](const KeyInfo& k) { return key == k.name; });
    if (info == std::end(kKeys) || !(info->commands & bit(command))) {
      errors.push_back("unknown key '" + key + "' for " + to_string(command));
      continue;
    }
    values[key] = value;
  }

  ExperimentConfig c;
  c.command = command;
  Reader r(values, errors, c.echo);
  r.integer("seed", c.seed);
  r.integer("threads", c.threads);
  r.text("out", c.out_dir);
  if (c.out_dir.empty()) r.violation("out must not be empty");
  if (c.threads < 0) r.violation("threads must be >= 0");

  const bool sim = command == Command::Simulate || command == Command::Moments;
  if (command == Command::Renewal) c.alpha = 2.0;
  r.real("alpha", c.alpha);
  if (!(c.alpha > 0.0 && c.alpha <= 2.0)) r.violation("alpha must lie in (0, 2]");
  if (command != Command::Renewal) {
    r.integer("dim", c.dim);
    if (c.dim < 1 || c.dim > 3) r.violation("dim must be 1, 2 or 3");
  }
  const int dim = std::clamp(c.dim, 1, 3);

  if (command == Command::VerifyKernel) {
    r.real("t_min", c.t_min);
    r.real("t_max", c.t_max);
    r.real("x_max", c.x_max);
    r.integer("resolution", c.resolution);
    r.text("report", c.report);
    if (!(c.t_min > 0.0)) r.violation("t_min must be positive");
    if (!(c.t_max > c.t_min)) r.violation("t_max must exceed t_min");
    if (!(c.x_max > 0.0)) r.violation("x_max must be positive");
    if (c.resolution < 2 || c.resolution > 4096) r.violation("resolution must lie in [2, 4096]");
  }

  if (command == Command::VerifyCorrelation || sim) {
    r.choice("kernel", c.kernel, {"white", "riesz", "expo", "ou", "poisson", "cauchy"});
    r.real("beta", c.beta);
    r.real("ou_exponent", c.ou_exponent);
    r.real("radius", c.radius);
    if (c.kernel == "riesz") {
      if (!(c.beta > 0.0)) r.violation("beta > 0 required");
      if (!(c.beta < c.dim)) r.violation("beta < d required");
    }
    if (c.kernel == "ou" && !(c.ou_exponent > 0.0 && c.ou_exponent <= 2.0)) {
      r.violation("ou_exponent must lie in (0, 2]");
    }
    if (!(c.radius > 0.0)) r.violation("radius must be positive");
  }

  if (command == Command::Renewal) {
    r.real("A", c.A);
    r.real("B", c.B);
    r.real("gamma", c.gamma);
    r.real("T", c.T);
    r.choice("form", c.form, {"singular", "power", "constant"});
    r.optional_real("mesh", c.mesh);
    r.optional_real("horizon", c.horizon);
    r.real("cap", c.cap);
    r.boolean("trajectory", c.trajectory);
    if (!(c.A > 0.0)) r.violation("A must be positive");
    if (!(c.B > 0.0)) r.violation("B must be positive");
    if (!(c.gamma > 0.0)) r.violation("gamma must be positive");
    if (!(c.T > 0.0)) r.violation("T must be positive");
    if (c.mesh && !(*c.mesh > 0.0)) r.violation("mesh must be positive");
    if (c.horizon && !(*c.horizon > 0.0)) r.violation("horizon must be positive");
    if (!(c.cap >= 1e12)) r.violation("cap must be >= 1e12");
    if (c.form == "singular" && !(c.alpha > 1.0)) {
      r.violation("singular kernel (t - s)^{-1/alpha} needs alpha > 1 to be integrable");
    }
    if (c.form == "power" && !((1.0 + c.gamma) / c.alpha < 1.0)) {
      r.violation("power form needs (1 + gamma) / alpha < 1; reduce the exponent first");
    }
  }

  if (sim) {
    r.choice("sigma_form", c.sigma_form, {"pure_power", "linear", "zero", "custom"});
    r.real("gamma", c.gamma);
    r.real("lambda", c.lambda);
    r.table("sigma_table", c.sigma_table);
    r.optional_real("kappa", c.kappa);
    r.optional_real("u0_radius", c.u0_radius);
    r.text("u0_file", c.u0_file);
    r.real("L", c.L);
    r.integer("n", c.n);
    r.real("dt", c.dt);
    r.real("t_end", c.t_end);
    r.optional_real("trunc_N", c.trunc_N);
    r.integer("paths", c.paths);
    r.choice("domain", c.domain, {"free", "ball"});
    r.list("snapshot_times", c.snapshot_times);

    if (!(c.gamma >= 0.0)) r.violation("gamma must be >= 0");
    if (c.sigma_form == "custom") {
      if (c.sigma_table.empty()) r.violation("sigma_form = custom needs sigma_table");
      for (std::size_t i = 1; i < c.sigma_table.size(); ++i) {
        if (!(c.sigma_table[i].first > c.sigma_table[i - 1].first)) {
          r.violation("sigma_table must be strictly increasing in u");
          break;
        }
      }
    }
    if (c.kernel == "white" && !(c.dim == 1 && c.alpha > 1.0 && c.alpha < 2.0)) {
      r.violation("white noise requires d=1, 1<alpha<2");
    }
    if (c.kernel == "expo") r.violation("kernel expo is not translation invariant and cannot be sampled");
    if (!power_of_two(c.n) || c.n < 4) r.violation("n must be a power of two >= 4");
    if (c.n > 0 && std::pow(static_cast<double>(c.n), dim) > 16777216.0) {
      r.violation("n^dim must not exceed 2^24 sites");
    }
    if (!(c.L > 0.0)) r.violation("L must be positive");
    if (!(c.dt > 0.0)) r.violation("dt must be positive");
    if (!(c.t_end > 0.0)) r.violation("t_end must be positive");
    if (c.dt > 0.0 && c.t_end > 0.0 && c.dt > c.t_end) r.violation("dt must not exceed t_end");
    if (c.t_end > 0.0 && c.alpha > 0.0 && c.L < 4.0 * std::pow(c.t_end, 1.0 / c.alpha)) {
      r.violation("wrap-around budget: L >= 4 t_end^{1/alpha} required (L >= " +
                  format_number(4.0 * std::pow(c.t_end, 1.0 / c.alpha)) + ")");
    }
    if (c.paths < 1) r.violation("paths must be >= 1");
    if (c.domain == "ball" && !(c.radius > 0.0 && c.radius <= c.L)) {
      r.violation("ball domain needs 0 < radius <= L");
    }
    if (c.kappa && !c.u0_file.empty()) r.violation("give kappa or u0_file, not both");
    if (c.u0_radius && !(*c.u0_radius > 0.0)) r.violation("u0_radius must be positive");
    if (!c.u0_file.empty()) {
      c.u0_values = load_values(c.u0_file, errors);
      const double sites = std::pow(static_cast<double>(c.n), dim);
      if (!c.u0_values.empty() && static_cast<double>(c.u0_values.size()) != sites) {
        r.violation("u0_file has " + std::to_string(c.u0_values.size()) + " values, the lattice has " +
                    format_number(sites) + " sites");
      }
    } else if (!c.kappa) {
      c.kappa = 1.0;
      c.echo["kappa"] = "1";
    }
    check_increasing(r, "snapshot_times", c.snapshot_times, false);
    for (double t : c.snapshot_times) {
      if (!(t >= 0.0 && t <= c.t_end)) {
        r.violation("snapshot_times must lie in [0, t_end]");
        break;
      }
    }
    if (!values.count("snapshot_times") && c.t_end > 0.0) {
      for (int k = 1; k <= 5; ++k) c.snapshot_times.push_back(c.t_end * k / 5.0);
      c.echo["snapshot_times"] = join_numbers(c.snapshot_times);
    }
  }

  if (command == Command::Moments) {
    r.choice("experiment", c.experiment, {"moments", "kappa_sweep", "horizon_sweep", "dirichlet"});
    r.points("probes", dim, c.probes);
    if (!values.count("probes")) {
      c.probes = {Point{}};
      c.echo["probes"] = format_point(Point{}, dim);
    }
    r.pairs("pairs", dim, c.pairs);
    r.list("kappas", c.kappas);
    r.list("horizons", c.horizons);
    r.list("diagnostic_times", c.diagnostic_times);
    r.real("threshold", c.threshold);
    r.integer("bootstrap", c.bootstrap);
    r.real("eps", c.eps);
    r.boolean("continue_after_hit", c.continue_after_hit);

    if (c.paths < 100) r.violation("moments needs paths >= 100");
    if (!(c.threshold > 0.0 && c.threshold <= 1.0)) r.violation("threshold must lie in (0, 1]");
    if (power_of_two(c.n) && c.L > 0.0 && c.n >= 4) {
      const Lattice lattice(dim, c.L, c.n);
      auto on_lattice = [&](const Point& p) { return lattice.find_site(p).has_value(); };
      for (const auto& p : c.probes) {
        if (!on_lattice(p)) {
          r.violation("probe " + format_point(p, dim) + " is not a lattice site (spacing " +
                      format_number(lattice.spacing()) + ")");
        }
      }
      for (const auto& pr : c.pairs) {
        if (!on_lattice(pr.x) || !on_lattice(pr.y)) {
          r.violation("pair " + format_point(pr.x, dim) + "|" + format_point(pr.y, dim) +
                      " is not on lattice sites");
        }
      }
    }
    if (c.experiment == "kappa_sweep") {
      if (c.kappas.size() < 3) r.violation("kappa_sweep needs at least 3 kappas");
      check_increasing(r, "kappas", c.kappas, true);
      if (std::any_of(c.kappas.begin(), c.kappas.end(), [](double k) { return !(k > 0.0); })) {
        r.violation("kappas must be positive");
      }
      if (!c.u0_file.empty()) r.violation("kappa_sweep scales a constant or ball profile; drop u0_file");
    }
    if (c.experiment == "horizon_sweep") {
      if (c.kernel != "riesz") r.violation("horizon_sweep needs kernel = riesz");
      if (c.horizons.empty()) r.violation("horizon_sweep needs horizons");
      if (c.diagnostic_times.size() < 2) r.violation("horizon_sweep needs at least 2 diagnostic_times");
      if (c.pairs.empty()) r.violation("horizon_sweep needs probe pairs");
      check_increasing(r, "horizons", c.horizons, true);
      check_increasing(r, "diagnostic_times", c.diagnostic_times, true);
      for (const auto* v : {&c.horizons, &c.diagnostic_times}) {
        if (std::any_of(v->begin(), v->end(), [&](double t) { return !(t > 0.0 && t <= c.t_end); })) {
          r.violation("horizons and diagnostic_times must lie in (0, t_end]");
          break;
        }
      }
    }
    if (c.experiment == "dirichlet") {
      if (c.domain != "ball") r.violation("dirichlet needs domain = ball");
      if (!(c.eps > 0.0 && c.eps < c.radius)) r.violation("eps must lie in (0, radius)");
      for (const auto& p : c.probes) {
        if (norm(p) > c.radius - c.eps) {
          r.violation("probe " + format_point(p, dim) + " is outside B(0, radius - eps)");
        }
      }
    }
  }

  if (sim) {
    // Default truncation level: 10 sup u0 (10 max kappa for a sweep).
    double sup = 0.0;
    if (!c.u0_values.empty()) {
      for (double v : c.u0_values) sup = std::max(sup, std::abs(v));
    } else if (c.kappa) {
      sup = std::abs(*c.kappa);
    }
    if (c.experiment == "kappa_sweep" && command == Command::Moments && !c.kappas.empty()) {
      sup = *std::max_element(c.kappas.begin(), c.kappas.end());
    }
    if (!c.trunc_N) {
      c.trunc_N = sup > 0.0 ? 10.0 * sup : 10.0;
      c.echo["trunc_N"] = format_number(*c.trunc_N);
    }
    if (!(*c.trunc_N > 0.0)) r.violation("trunc_N must be positive");
    if (*c.trunc_N < sup) r.violation("trunc_N must be >= sup |u0|");
  }

  if (!errors.empty()) throw ConfigError(std::move(errors));
  // Unset optional keys are echoed empty so the echo always lists the full schema.
  for (const auto& key : known_keys(command)) c.echo.try_emplace(key, "");
  return c;
}

CorrelationKernel make_kernel(const ExperimentConfig& c) {
  if (c.kernel == "white") return CorrelationKernel::white_noise(c.dim);
  if (c.kernel == "riesz") return CorrelationKernel::riesz(c.beta, c.dim);
  if (c.kernel == "expo") return CorrelationKernel::exponential_type(c.dim);
  if (c.kernel == "ou") return CorrelationKernel::ornstein_uhlenbeck(c.ou_exponent, c.dim);
  if (c.kernel == "poisson") return CorrelationKernel::poisson(c.dim);
  return CorrelationKernel::cauchy(c.dim);
}

SimulationConfig to_simulation(const ExperimentConfig& c) {
  SimulationConfig s;
  s.spec = StableKernelSpec(c.alpha, c.dim);
  if (c.sigma_form == "pure_power") {
    s.sigma = SigmaSpec::pure_power(c.gamma);
  } else if (c.sigma_form == "linear") {
    s.sigma = SigmaSpec::linear(c.lambda);
  } else if (c.sigma_form == "zero") {
    s.sigma = SigmaSpec::zero();
  } else {
    s.sigma = SigmaSpec::custom(c.sigma_table, c.gamma);
  }
  s.noise = make_kernel(c);
  s.lattice = Lattice(c.dim, c.L, c.n);
  if (!c.u0_values.empty()) {
    s.u0 = c.u0_values;
  } else {
    s.u0.assign(s.lattice.site_count(), c.kappa.value_or(1.0));
    if (c.u0_radius) {
      for (std::size_t i = 0; i < s.u0.size(); ++i) {
        if (norm(s.lattice.site(i)) > *c.u0_radius) s.u0[i] = 0.0;
      }
    }
  }
  s.dt = c.dt;
  s.t_end = c.t_end;
  s.trunc_level = c.trunc_N.value_or(10.0);
  s.domain = c.domain == "ball" ? Domain::ball(c.radius) : Domain::free_space();
  s.snapshot_times = c.snapshot_times;
  return s;
}

}  // namespace fshe::app
