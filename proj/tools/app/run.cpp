#include "run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <limits>
#include <optional>

#include "fshe/correlation.hpp"
#include "fshe/field_sim.hpp"
#include "fshe/moments.hpp"
#include "fshe/renewal.hpp"
#include "fshe/stable_kernel.hpp"
#include "fshe/version.hpp"
#include "output.hpp"

namespace fshe::app {

namespace {

using Json = nlohmann::ordered_json;

// Paths are aggregated in fixed blocks so the reduction order never depends on
// the thread count.
constexpr std::size_t kBlock = 32;

const char* kProxyNote =
    "blow-up proxy: fraction of paths whose lattice sup |u| exceeded trunc_N; a modelling "
    "surrogate for an infinite second moment";

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json config_json(const ExperimentConfig& c) {
  Json j = Json::object();
  for (const auto& [k, v] : c.echo) j[k] = v;
  return j;
}

// OpenMP loop that carries the first exception out of the parallel region.
template <class F>
void parallel_each(std::size_t n, F&& body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(fshe_app_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

double clip_signed(double v, double n) {
  if (std::isnan(v)) return n;
  return std::copysign(std::min(std::abs(v), n), v);
}

// ---------------------------------------------------------------------------

Json verify_kernel(const ExperimentConfig& c, ArtifactWriter& w) {
  const StableKernelSpec spec(c.alpha, c.dim);
  const KernelBoundReport report = check_two_sided_bound(spec, c.t_min, c.t_max, c.x_max, c.resolution);
  const KernelBoundReport refined =
      check_two_sided_bound(spec, c.t_min, c.t_max, c.x_max, 2 * c.resolution);

  CsvText csv({"t", "x", "p", "bound_lo", "bound_hi", "ratio"});
  for (const GridSample& g : report.grid) {
    csv.cell(g.t).cell(g.x[0]).cell(g.value).cell(report.c1_hat * g.reference)
        .cell(report.c2_hat * g.reference).cell(g.ratio);
    csv.end_row();
  }
  if (c.report.empty()) {
    w.write("kernel.csv", csv.str());
  } else {
    w.write_path(c.report, csv.str());
  }

  std::vector<Point> xs;
  for (int j = 0; j < c.resolution; ++j) {
    xs.push_back(point1(-c.x_max + 2.0 * c.x_max * j / (c.resolution - 1)));
  }
  const double scaling_error = check_scaling(spec, 2.0, 1.0, xs);
  // Product bound at a time where p_t(0) = 2^{-d/alpha} <= 1.
  const double t_mono = 2.0 * time_for_peak(spec, 1.0);
  std::vector<std::pair<Point, Point>> pairs;
  for (const Point& x : xs) {
    for (const Point& y : xs) pairs.emplace_back(x, y);
  }
  const KernelBoundReport mono = check_product_bound(spec, t_mono, 2.0, pairs);

  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  Json j;
  j["alpha"] = c.alpha;
  j["dim"] = c.dim;
  j["t_min"] = c.t_min;
  j["t_max"] = c.t_max;
  j["x_max"] = c.x_max;
  j["resolution"] = c.resolution;
  j["c1_hat"] = report.c1_hat;
  j["c2_hat"] = report.c2_hat;
  j["c1_hat_refined"] = refined.c1_hat;
  j["c2_hat_refined"] = refined.c2_hat;
  const bool stable = report.c1_hat > 0.0 && rel(refined.c1_hat, report.c1_hat) <= 0.1 &&
                      rel(refined.c2_hat, report.c2_hat) <= 0.1;
  j["stable_under_refinement"] = stable;
  j["advisory"] = report.advisory;
  if (!report.note.empty()) j["note"] = report.note;
  j["scaling_max_rel_error"] = scaling_error;
  j["product_bound"] = {{"t", t_mono},
                        {"tau", 2.0},
                        {"pairs", pairs.size()},
                        {"violations", mono.violations.size()},
                        {"hypothesis_met", mono.hypothesis_met}};
  w.write("kernel_report.json", j.dump(2) + "\n");
  return j;
}

// ---------------------------------------------------------------------------

Json verify_correlation(const ExperimentConfig& c, ArtifactWriter& w) {
  const CorrelationKernel kernel = make_kernel(c);
  const StableKernelSpec spec(c.alpha, c.dim);
  const DalangVerdict v = check_dalang(kernel, spec);
  Json j;
  j["kernel"] = kernel.name();
  j["dim"] = c.dim;
  j["alpha"] = c.alpha;
  if (c.kernel == "riesz") j["beta"] = c.beta;
  if (c.kernel == "ou") j["ou_exponent"] = c.ou_exponent;
  j["translation_invariant"] = kernel.translation_invariant();
  Json d;
  d["passes"] = v.passes;
  d["inconclusive"] = v.inconclusive;
  d["condition_used"] = v.condition_used;
  if (kernel.kind() != CorrelationKernel::Kind::WhiteNoise) {
    d["integral"] = v.diagnostic.converged ? Json(v.diagnostic.value) : Json(nullptr);
    d["tail_ratio"] = v.diagnostic.tail_ratio;
  }
  if (v.beta_below_alpha_and_d) d["beta_below_alpha_and_d"] = *v.beta_below_alpha_and_d;
  j["dalang"] = d;
  if (kernel.kind() != CorrelationKernel::Kind::WhiteNoise) {
    j["K_f"] = {{"radius", c.radius},
                {"analytic", infimum_on_ball(kernel, c.radius)},
                {"grid_search", infimum_on_ball_by_search(kernel, c.radius, 24)}};
  }
  w.write("correlation.json", j.dump(2) + "\n");
  return j;
}

// ---------------------------------------------------------------------------

Json renewal(const ExperimentConfig& c, ArtifactWriter& w) {
  RenewalProblem p;
  p.A = c.A;
  p.B = c.B;
  p.gamma = c.gamma;
  p.alpha = c.alpha;
  p.T = c.T;
  double analytic = 0.0;
  std::string analytic_kind = "exact";
  if (c.form == "constant") {
    p.kernel = RenewalKernel::Constant;
    analytic = blowup_time_singular(c.A, c.B, c.gamma, c.alpha, c.T).t_star;
  } else if (c.form == "singular") {
    p.kernel = RenewalKernel::SingularDifference;
    // (t - s)^{-1/alpha} >= T^{-1/alpha} on [0, T]: the constant-kernel time bounds t_star from above.
    analytic = blowup_time_singular(c.A, c.B, c.gamma, c.alpha, c.T).t_star;
    analytic_kind = "upper_bound";
  } else {
    p.kernel = RenewalKernel::PowerState;
    analytic = blowup_time_power(c.A, c.B, c.gamma, c.alpha);
  }
  const double origin = p.time_origin();
  VolterraOptions opts;
  opts.horizon = c.horizon.value_or(1.5 * (analytic - origin));
  opts.mesh = c.mesh.value_or(opts.horizon / 3000.0);
  opts.cap = c.cap;
  opts.keep_trajectory = c.trajectory;
  int rescales = 0;
  if (!c.mesh && !c.horizon) {
    // Shrink the window onto the blow-up scale: t_star can sit far below the
    // analytic value (singular kernel), where a fixed 3000-cell mesh is too coarse.
    VolterraOptions probe = opts;
    probe.keep_trajectory = false;
    for (; rescales < 20; ++rescales) {
      const auto found = solve_volterra_single(p, probe).t_star;
      if (!found) break;
      const double span = 1.5 * (*found - origin);
      if (span > 0.5 * probe.horizon) break;
      probe.horizon = span;
      probe.mesh = span / 3000.0;
    }
    opts.horizon = probe.horizon;
    opts.mesh = probe.mesh;
  }
  const BlowupSolution sol = solve_volterra_numeric(p, opts);

  Json j;
  j["form"] = c.form;
  j["A"] = c.A;
  j["B"] = c.B;
  j["gamma"] = c.gamma;
  j["alpha"] = c.alpha;
  j["T"] = c.T;
  j["mesh"] = opts.mesh;
  j["horizon"] = opts.horizon;
  j["horizon_rescales"] = rescales;
  j["t_star_analytic"] = analytic;
  j["analytic_kind"] = analytic_kind;
  j["t_star_numeric"] = opt(sol.t_star);
  j["t_star_extrapolated"] = opt(sol.t_star_extrapolated);
  j["rel_err"] = sol.t_star ? Json(std::abs(*sol.t_star - analytic) / analytic) : Json(nullptr);
  if (c.form == "singular") j["certified_within_T"] = analytic <= c.T;
  w.write("renewal.json", j.dump(2) + "\n");
  if (c.trajectory) {
    CsvText csv({"t", "g"});
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
      csv.cell(sol.times[i]).cell(sol.values[i]);
      csv.end_row();
    }
    w.write("renewal_trajectory.csv", csv.str());
  }
  return j;
}

// ---------------------------------------------------------------------------

std::vector<std::string> coordinate_header(int dim) {
  if (dim == 1) return {"x"};
  std::vector<std::string> h;
  for (int j = 1; j <= dim; ++j) h.push_back("x" + std::to_string(j));
  return h;
}

Json simulation_log(const SimulationConfig& sim, const MildStepper& stepper, std::size_t steps) {
  const double clip = stepper.sampler().clip_fraction();
  Json j;
  j["steps"] = steps;
  j["spacing"] = sim.lattice.spacing();
  j["sites"] = sim.lattice.site_count();
  j["wrap_budget_L_min"] = 4.0 * std::pow(sim.t_end, 1.0 / sim.spec.alpha());
  j["noise"] = {{"kernel", sim.noise.name()},
                {"clip_fraction", clip},
                {"clip_within_1e-3", clip <= 1e-3},
                {"lag0_covariance", stepper.sampler().lag_covariance(0)}};
  return j;
}

Json simulate(const ExperimentConfig& c, ArtifactWriter& w) {
  const SimulationConfig sim = to_simulation(c);
  validate_simulation(sim);
  const MildStepper stepper(sim.spec, sim.sigma, sim.noise, sim.lattice, sim.dt, sim.domain);
  const auto [steps, snap_idx] = step_schedule(sim);
  const std::size_t ns = snap_idx.size();
  const std::size_t sites = sim.lattice.site_count();
  const double level = sim.trunc_level;

  // Chan's merge of per-block (count, mean, M2), blocks in path order.
  std::vector<double> mean(ns * sites, 0.0);
  std::vector<double> m2(ns * sites, 0.0);
  double count = 0.0;
  std::vector<std::optional<double>> hits(c.paths);
  std::vector<double> block_values(kBlock);
  for (std::size_t start = 0; start < c.paths; start += kBlock) {
    const std::size_t bn = std::min(kBlock, c.paths - start);
    std::vector<PathRecord> recs(bn);
    parallel_each(bn, [&](std::size_t i) { recs[i] = run_path(sim, stepper, c.seed, start + i); });
    for (std::size_t i = 0; i < bn; ++i) hits[start + i] = recs[i].hit_time;
    const double nb = static_cast<double>(bn);
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t k = 0; k < sites; ++k) {
        double bm = 0.0;
        for (std::size_t i = 0; i < bn; ++i) {
          block_values[i] = clip_signed(recs[i].snapshots[s].values[k], level);
          bm += block_values[i];
        }
        bm /= nb;
        double bm2 = 0.0;
        for (std::size_t i = 0; i < bn; ++i) bm2 += (block_values[i] - bm) * (block_values[i] - bm);
        const std::size_t idx = s * sites + k;
        const double total = count + nb;
        const double delta = bm - mean[idx];
        mean[idx] += delta * nb / total;
        m2[idx] += bm2 + delta * delta * count * nb / total;
      }
    }
    count += nb;
  }

  CsvText paths_csv({"path_id", "hit_time"});
  std::size_t hit_count = 0;
  for (std::size_t i = 0; i < c.paths; ++i) {
    paths_csv.cell(i).cell(hits[i] ? *hits[i] : std::numeric_limits<double>::infinity());
    paths_csv.end_row();
    hit_count += hits[i] ? 1 : 0;
  }
  w.write("paths.csv", paths_csv.str());

  std::vector<std::string> header{"t"};
  for (const auto& h : coordinate_header(c.dim)) header.push_back(h);
  header.insert(header.end(), {"mean", "var"});
  CsvText snaps(header);
  for (std::size_t s = 0; s < ns; ++s) {
    const double t = static_cast<double>(snap_idx[s]) * sim.dt;
    for (std::size_t k = 0; k < sites; ++k) {
      const Point x = sim.lattice.site(k);
      snaps.cell(t);
      for (int j = 0; j < c.dim; ++j) snaps.cell(x[static_cast<std::size_t>(j)]);
      const std::size_t idx = s * sites + k;
      snaps.cell(mean[idx]).cell(count > 1.0 ? m2[idx] / (count - 1.0) : 0.0);
      snaps.end_row();
    }
  }
  w.write("snapshots.csv", snaps.str());

  Json run;
  run["config"] = config_json(c);
  run["log"] = simulation_log(sim, stepper, steps);
  run["log"]["snapshot_values"] = "clipped to [-trunc_N, trunc_N], frozen after a path's hit";
  run["paths"] = c.paths;
  run["hit_count"] = hit_count;
  run["hit_fraction"] = static_cast<double>(hit_count) / static_cast<double>(c.paths);
  w.write("run.json", run.dump(2) + "\n");
  return run;
}

// ---------------------------------------------------------------------------

void add_series(CsvText& csv, const std::string& name, const MomentSeries& s) {
  const double m = static_cast<double>(s.paths);
  for (std::size_t t = 0; t < s.times.size(); ++t) {
    auto row = [&](const char* quantity, const std::string& index, double value, double se) {
      csv.cell(name).cell(s.times[t]).cell(std::string(quantity)).cell(index).cell(value).cell(se);
      csv.end_row();
    };
    for (std::size_t j = 0; j < s.probes.size(); ++j) {
      row("second_moment", std::to_string(j), s.second_moment[t][j], s.second_stderr[t][j]);
      row("mean", std::to_string(j), s.mean[t][j], s.mean_stderr[t][j]);
    }
    for (std::size_t q = 0; q < s.pairs.size(); ++q) {
      row("cross_moment", std::to_string(q), s.cross_moment[t][q], s.cross_stderr[t][q]);
      row("covariance", std::to_string(q), s.covariance[t][q], s.covariance_stderr[t][q]);
    }
    const double f = s.hit_fraction[t];
    row("hit_fraction", "", f, std::sqrt(f * (1.0 - f) / m));
  }
}

CsvText moments_csv() { return CsvText({"series", "t", "quantity", "index", "value", "std_error"}); }

Json blowup_json(const BlowupReport& r) {
  return {{"verdict", to_string(r.verdict)}, {"t0_hat", opt(r.t0_hat)}, {"kappa", r.kappa},
          {"threshold", r.threshold},        {"trunc_N", r.trunc_level}, {"paths", r.paths}};
}

Json moments(const ExperimentConfig& c, ArtifactWriter& w) {
  const SimulationConfig sim = to_simulation(c);
  validate_simulation(sim);
  Json report;
  report["experiment"] = c.experiment;
  report["config"] = config_json(c);
  report["note"] = kProxyNote;

  if (c.experiment == "moments") {
    MomentOptions mo;
    mo.continue_after_hit = c.continue_after_hit;
    const MomentSeries s = estimate_moments(sim, c.probes, c.pairs, c.paths, c.seed, mo);
    CsvText csv = moments_csv();
    add_series(csv, "main", s);
    w.write("moments.csv", csv.str());
    CsvText sweep({"t", "hit_fraction"});
    for (std::size_t i = 0; i < s.times.size(); ++i) {
      sweep.cell(s.times[i]).cell(s.hit_fraction[i]);
      sweep.end_row();
    }
    w.write("sweep.csv", sweep.str());
    report["blowup"] = blowup_json(detect_blowup_proxy(s, c.threshold));
  } else if (c.experiment == "kappa_sweep") {
    const KappaSweepResult r = kappa_sweep(sim, c.kappas, c.paths, c.seed, c.threshold, c.bootstrap);
    CsvText sweep({"kappa", "t0_hat", "verdict", "final_hit_fraction"});
    Json rows = Json::array();
    for (const auto& row : r.rows) {
      const auto verdict = row.t0_hat ? BlowupReport::Verdict::BlowupProxyDetected
                                      : BlowupReport::Verdict::NoneWithinHorizon;
      sweep.cell(row.kappa).cell(row.t0_hat ? fmt(*row.t0_hat) : std::string("none"))
          .cell(to_string(verdict)).cell(row.final_hit_fraction);
      sweep.end_row();
      rows.push_back({{"kappa", row.kappa}, {"t0_hat", opt(row.t0_hat)}, {"verdict", to_string(verdict)},
                      {"final_hit_fraction", row.final_hit_fraction}});
    }
    w.write("sweep.csv", sweep.str());
    report["rows"] = rows;
    report["nonincreasing"] = r.nonincreasing;
    report["bootstrap_replicates"] = c.bootstrap;
    report["bootstrap_confidence"] = r.bootstrap_confidence;
    report["smallest_detecting_kappa"] = opt(r.smallest_detecting_kappa);
  } else if (c.experiment == "horizon_sweep") {
    const double kappa = c.kappa.value_or(1.0);
    const HorizonSweepResult r =
        horizon_sweep_riesz(sim, kappa, c.horizons, c.diagnostic_times, c.pairs, c.paths, c.seed);
    CsvText csv = moments_csv();
    for (std::size_t i = 0; i < r.diagnostic_times.size(); ++i) {
      csv.cell(std::string("main")).cell(r.diagnostic_times[i]).cell(std::string("covariance_diagnostic"))
          .cell(std::string("")).cell(r.diagnostic[i]).cell(r.diagnostic_stderr[i]);
      csv.end_row();
    }
    w.write("moments.csv", csv.str());
    CsvText sweep({"horizon", "hit_fraction"});
    for (const auto& row : r.rows) {
      sweep.cell(row.horizon).cell(row.hit_fraction);
      sweep.end_row();
    }
    w.write("sweep.csv", sweep.str());
    report["nondecreasing"] = r.nondecreasing;
    report["slope"] = r.slope;
    report["target_slope"] = r.target_slope;
    report["slope_ok"] = r.slope_ok;
  } else {
    const DirichletExperimentResult r =
        dirichlet_experiment(sim, c.eps, c.probes, c.paths, c.seed, c.threshold);
    CsvText csv = moments_csv();
    add_series(csv, "killed", r.killed_series);
    add_series(csv, "free", r.free_series);
    w.write("moments.csv", csv.str());
    CsvText sweep({"domain", "t0_hat", "verdict"});
    for (const auto& [name, b] : {std::pair{"killed", &r.killed}, std::pair{"free", &r.free}}) {
      sweep.cell(std::string(name)).cell(b->t0_hat ? fmt(*b->t0_hat) : std::string("none"))
          .cell(to_string(b->verdict));
      sweep.end_row();
    }
    w.write("sweep.csv", sweep.str());
    report["killed"] = blowup_json(r.killed);
    report["free"] = blowup_json(r.free);
    report["killed_not_earlier"] = r.killed_not_earlier;
  }
  w.write("report.json", report.dump(2) + "\n");
  return report;
}

}  // namespace

Json to_json(const RunManifest& m) {
  Json j;
  j["command"] = m.command;
  j["seed"] = m.seed;
  Json cfg = Json::object();
  for (const auto& [k, v] : m.config) cfg[k] = v;
  j["config"] = cfg;
  j["artifacts"] = m.artifacts;
  j["started_utc"] = m.started_utc;
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  j["versions"] = m.versions;
  return j;
}

RunOutcome run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunOutcome out;
  out.manifest.command = to_string(config.command);
  out.manifest.config = config.echo;
  out.manifest.seed = config.seed;
  out.manifest.started_utc = utc_now();
  if (config.threads > 0) set_thread_count(config.threads);

  ArtifactWriter writer(config.out_dir);
  try {
    switch (config.command) {
      case Command::VerifyKernel: out.summary = verify_kernel(config, writer); break;
      case Command::VerifyCorrelation: out.summary = verify_correlation(config, writer); break;
      case Command::Renewal: out.summary = renewal(config, writer); break;
      case Command::Simulate: out.summary = simulate(config, writer); break;
      case Command::Moments: out.summary = moments(config, writer); break;
    }
    out.manifest.artifacts = writer.written();
    out.manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.manifest.versions = {{"fshe", library_version()},
                             {"fft", fft_backend_version()},
                             {"compiler", __VERSION__},
                             {"threads", thread_count()}};
    writer.write("manifest.json", to_json(out.manifest).dump(2) + "\n");
  } catch (...) {
    writer.remove_written();
    throw;
  }
  return out;
}

}  // namespace fshe::app
