/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/

#include "commands.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "sdews/error.hpp"

namespace sdews::cli {

using nlohmann::json;

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << content;
}

void write_manifest(const RunConfig& c, json results,
                    std::chrono::steady_clock::time_point start) {
  const double wall = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  json manifest = make_manifest(c, wall);
  manifest["results"] = std::move(results);
  write_file(std::filesystem::path(c.output_dir) / "manifest.json",
             manifest.dump(2) + "\n");
}

SimulationPlan base_plan(const RunConfig& c) {
  SimulationPlan plan;
  plan.h = c.h.empty() ? 0.1 : c.h.front();
  plan.trajectories = c.trajectories;
  plan.noise = c.noise;
  plan.ordering = c.ordering;
  plan.rejection_radius = c.rejection_radius;
  plan.seed = c.seed;
  plan.workers = c.workers;
  if (c.initial) plan.initial = *c.initial;
  return plan;
}

SdewsSystem ergodic_system(const RunConfig& c) {
  MixtureModel model = build_model(c);
  RatePolicy policy = build_policy(c, &model);
  return SdewsSystem::ergodic(std::move(model), std::move(policy));
}

double reference_value(const RunConfig& c, const MixtureModel& model,
                       const ObservableSpec& observable) {
  if (c.reference) return *c.reference;
  return exact_observable(model, observable.kind() == ObservableSpec::Kind::kSecondMoment
                                     ? Observable::kSecondMoment
                                     : Observable::kSquaredNorm);
}

json fit_json(const std::optional<LogLogFit>& fit) {
  if (!fit) return nullptr;
  return {{"slope", fit->slope}, {"intercept", fit->intercept}, {"points", fit->points}};
}

int cmd_sample(const RunConfig& c, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const SdewsSystem system = ergodic_system(c);
  SimulationPlan plan = base_plan(c);
  plan.steps = steps_for_horizon(c.horizon, plan.h);
  const ObservableSpec obs = build_observable(c, system.dimension());
  const HistogramSpec spec =
      c.histogram.value_or(HistogramSpec::default_for(system.dimension()));
  const EstimatorReport report = ensemble_estimate(system, plan, obs, spec);
  const auto masses = exact_bin_masses(*system.model(), spec);
  write_file(std::filesystem::path(c.output_dir) / "histogram.csv",
             histogram_csv(*report.histogram, masses));

  json results = {{"estimate", report.estimate},
                  {"mc_half_width", report.mc_half_width ? json(*report.mc_half_width) : json(nullptr)},
                  {"rejected", report.rejected_count},
                  {"tvd", report.tvd ? json(*report.tvd) : json(nullptr)},
                  {"warnings", report.warnings}};
  write_manifest(c, results, start);
  out << fmt::format("phi_hat = {}  half-width = {}  TVD = {}  rejected = {}\n",
                     format_double(report.estimate),
                     format_double(report.mc_half_width.value_or(NAN)),
                     format_double(report.tvd.value_or(NAN)), report.rejected_count);
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  return 0;
}

int cmd_converge(const RunConfig& c, std::ostream& out, bool tvd_only) {
  const auto start = std::chrono::steady_clock::now();
  const SdewsSystem system = ergodic_system(c);
  const SimulationPlan plan = base_plan(c);
  const ObservableSpec obs = build_observable(c, system.dimension());
  const double reference = reference_value(c, *system.model(), obs);
  std::optional<HistogramSpec> hist = c.histogram;
  if (tvd_only && !hist) hist = HistogramSpec::default_for(system.dimension());

  ConvergenceStudy study;
  json results;
  int code = 0;
  try {
    study = convergence_study(system, plan, c.horizon, c.h, obs, reference, hist,
                              [&](const ConvergenceRow& row) {
                                out << fmt::format(
                                    "h = {}  phi_hat = {}  error = {}  +- {}{}\n",
                                    format_double(row.h), format_double(row.estimate),
                                    format_double(row.error),
                                    format_double(row.mc_half_width),
                                    row.tvd ? "  TVD = " + format_double(*row.tvd)
                                            : std::string());
                              });
  } catch (const StepSizeViolation& e) {
    out << "error: " << e.what() << "\n";
    results["error"] = e.what();
    code = static_cast<int>(ExitCode::kNumericalGuard);
  }
  fit_study(study);

  std::string csv;
  if (tvd_only) {
    csv = "h,M,T,tvd\n";
    for (const auto& r : study.rows) {
      csv += fmt::format("{},{},{},{}\n", format_double(r.h), r.trajectories,
                         format_double(r.horizon), format_double(r.tvd.value_or(NAN)));
    }
  } else {
    csv = convergence_csv(study);
  }
  write_file(std::filesystem::path(c.output_dir) /
                 (tvd_only ? "tvd.csv" : "convergence.csv"),
             csv);

  results["reference"] = reference;
  results["bias_slope"] = fit_json(study.bias_fit);
  results["tvd_slope"] = fit_json(study.tvd_fit);
  json rows = json::array();
  for (const auto& r : study.rows) {
    rows.push_back({{"h", r.h}, {"seed", r.seed}, {"rejected", r.rejected},
                    {"in_fit", r.in_fit}});
  }
  results["rows"] = rows;
  write_manifest(c, results, start);

  out << csv;
  if (!tvd_only) {
    out << "bias slope: "
        << (study.bias_fit ? format_double(study.bias_fit->slope)
                           : std::string("n/a (fewer than two resolved rows)"))
        << "\n";
  }
  if (study.tvd_fit) out << "TVD slope: " << format_double(study.tvd_fit->slope) << "\n";
  return code;
}

int cmd_time_average(const RunConfig& c, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const SdewsSystem system = ergodic_system(c);
  SimulationPlan plan = base_plan(c);
  plan.averaging_steps = *c.averaging_steps;
  const ObservableSpec obs = build_observable(c, system.dimension());
  const double reference = reference_value(c, *system.model(), obs);
  const EstimatorReport report = time_average_estimate(system, plan, obs);
  const std::string csv =
      "h,L,R,phi_check,error,mc_half_width\n" +
      fmt::format("{},{},{},{},{},{}\n", format_double(plan.h), plan.averaging_steps,
                  plan.trajectories, format_double(report.estimate),
                  format_double(report.estimate - reference),
                  report.mc_half_width ? format_double(*report.mc_half_width)
                                       : std::string());
  write_file(std::filesystem::path(c.output_dir) / "time_average.csv", csv);
  write_manifest(c,
                 {{"estimate", report.estimate},
                  {"reference", reference},
                  {"rejected", report.rejected_count}},
                 start);
  out << csv;
  return 0;
}

int cmd_fpe_check(const RunConfig& c, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const MixtureModel model = build_model(c);
  const RatePolicy policy = build_policy(c, &model);
  policy.validate(&model);
  const FpeGridResult r = fpe_grid_check(model, policy, c.grid, c.delta);
  const bool pass = r.max_residual <= c.tolerance;
  write_manifest(c,
                 {{"max_residual", r.max_residual},
                  {"argmax", r.argmax},
                  {"argmax_regime", r.argmax_regime},
                  {"evaluated", r.evaluated},
                  {"skipped", r.skipped},
                  {"tolerance", c.tolerance},
                  {"pass", pass}},
                 start);
  out << fmt::format("max residual {} over {} points ({} skipped): {}\n",
                     format_double(r.max_residual), r.evaluated, r.skipped,
                     pass ? "ok" : "above tolerance");
  return pass ? 0 : static_cast<int>(ExitCode::kNumericalGuard);
}

int cmd_oracle(const RunConfig& c, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  json fixtures = json::array();
  for (const auto& f : standard_fixtures()) {
    fixtures.push_back(to_json(f));
    out << fmt::format("{:<36} {:<22} +- {}\n", f.name, format_double(f.value),
                       format_double(f.oracle_error));
  }
  write_file(std::filesystem::path(c.output_dir) / "oracle_fixtures.json",
             fixtures.dump(2) + "\n");
  write_manifest(c, {{"fixtures", fixtures.size()}}, start);
  return 0;
}

int cmd_ctmc_check(const RunConfig& c, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const RatePolicy policy = build_policy(c, nullptr);
  const std::size_t n = c.q.size();
  auto zero = [](double, std::span<const double>, std::size_t,
                 std::span<double> o) { std::fill(o.begin(), o.end(), 0.0); };
  const SdewsSystem system = SdewsSystem::general(1, n, zero, zero, policy);

  SimulationPlan plan = base_plan(c);
  plan.steps = steps_for_horizon(c.horizon, plan.h);
  FixedPoint fp = c.initial.value_or(FixedPoint{{0.0}, 0});
  if (fp.x0.empty()) fp.x0 = {0.0};
  plan.initial = fp;
  const RegimeOccupation occ = regime_occupation(system, plan);

  std::vector<double> p0(n, 0.0);
  if (fp.regime >= n) throw ConfigError("initial.regime out of range");
  p0[fp.regime] = 1.0;
  std::vector<double> rates(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) rates[i * n + j] = i == j ? 0.0 : c.q[i][j];
  }
  const auto exact = ctmc_marginal(RateMatrix::from_off_diagonal(n, rates), p0,
                                   c.horizon);

  const double m = static_cast<double>(plan.trajectories);
  std::string csv = "regime,empirical,exact,binomial_sigma,tolerance,pass\n";
  bool all_pass = true;
  json fixtures = json::array();
  for (std::size_t j = 0; j < n; ++j) {
    const double p_hat = static_cast<double>(occ.counts[j]) / m;
    const double sigma = std::sqrt(exact[j] * (1.0 - exact[j]) / m);
    const double tol = std::max(4.0 * sigma, 5.0 * plan.h);
    const bool pass = std::abs(p_hat - exact[j]) <= tol;
    all_pass = all_pass && pass;
    csv += fmt::format("{},{},{},{},{},{}\n", j, format_double(p_hat),
                       format_double(exact[j]), format_double(sigma),
                       format_double(tol), pass ? 1 : 0);
    fixtures.push_back(to_json(OracleFixture{fmt::format("ctmc.p{}", j), exact[j],
                                             1e-12, "matrix exponential"}));
  }
  write_file(std::filesystem::path(c.output_dir) / "ctmc.csv", csv);
  write_file(std::filesystem::path(c.output_dir) / "ctmc_fixtures.json",
             fixtures.dump(2) + "\n");
  write_manifest(c, {{"pass", all_pass}}, start);
  out << csv;
  return all_pass ? 0 : static_cast<int>(ExitCode::kOracleFailure);
}

}  // namespace

json make_manifest(const RunConfig& config, double wall_seconds) {
  return {{"version", SDEWS_VERSION},
          {"command", config.command},
          {"seed", config.seed},
          {"wall_time_s", wall_seconds},
          {"config", to_json(config)}};
}

int run(const RunConfig& c, std::ostream& out) {
  if (c.command == "sample") return cmd_sample(c, out);
  if (c.command == "converge") return cmd_converge(c, out, false);
  if (c.command == "tvd") return cmd_converge(c, out, true);
  if (c.command == "time-average") return cmd_time_average(c, out);
  if (c.command == "fpe-check") return cmd_fpe_check(c, out);
  if (c.command == "oracle") return cmd_oracle(c, out);
  if (c.command == "ctmc-check") return cmd_ctmc_check(c, out);
  throw ConfigError("unknown command '" + c.command + "'");
}

}  // namespace sdews::cli
