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

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "commands.hpp"
#include "run_config.hpp"
#include "sdews/error.hpp"

namespace {

using sdews::ExitCode;
using namespace sdews::cli;

struct Flags {
  std::string config;
  std::string preset;
  std::string h;
  std::string m;
  std::string t;
  std::string l;
  std::string t_tilde;
  std::string seed;
  std::string radius;
  std::string noise;
  std::string ordering;
  std::string policy;
  std::string betas;
  std::string q;
  std::string workers;
  std::string out;
  std::string grid;
  std::string delta;
  std::string tolerance;
  std::string bins;
  std::string range;
  std::string observable;
  std::string reference;
  std::string x0;
  std::string regime;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config or manifest to start from");
  cmd->add_option("--preset", f.preset, "mixture preset: example1, example2, example3");
  cmd->add_option("--h", f.h, "step size, or comma-separated list for converge/tvd");
  cmd->add_option("--M", f.m, "number of trajectories (replicas for time-average)");
  cmd->add_option("--T", f.t, "time horizon");
  cmd->add_option("--L", f.l, "averaging steps for time-average");
  cmd->add_option("--T-tilde", f.t_tilde, "averaging horizon for time-average");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--radius", f.radius, "rejection radius R");
  cmd->add_option("--noise", f.noise, "gaussian or rademacher");
  cmd->add_option("--ordering", f.ordering, "switch_first or simultaneous");
  cmd->add_option("--policy", f.policy, "density, density_scaled or constant");
  cmd->add_option("--betas", f.betas, "comma-separated betas for density_scaled");
  cmd->add_option("--q", f.q, "row-major comma-separated constant rate matrix");
  cmd->add_option("--workers", f.workers, "worker threads (0 = all cores)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--grid", f.grid, "FPE grid lo:hi:step");
  cmd->add_option("--delta", f.delta, "finite-difference step for fpe-check");
  cmd->add_option("--tolerance", f.tolerance, "fpe-check residual tolerance");
  cmd->add_option("--bins", f.bins, "histogram bins per axis");
  cmd->add_option("--range", f.range, "histogram range lo:hi on every axis");
  cmd->add_option("--observable", f.observable, "second_moment or squared_norm");
  cmd->add_option("--reference", f.reference, "override the reference value");
  cmd->add_option("--x0", f.x0, "fixed initial point (comma-separated)");
  cmd->add_option("--regime", f.regime, "fixed initial regime (0-based)");
}

void apply_flags(const Flags& f, const std::string& command, RunConfig& c) {
  if (!f.config.empty()) c = load_config_file(f.config);
  c.command = command;
  if (!f.preset.empty()) c.mixture = f.preset;
  if (!f.h.empty()) c.h = parse_real_list(f.h);
  if (!f.m.empty()) c.trajectories = parse_count(f.m);
  if (!f.t.empty()) c.horizon = parse_real(f.t);
  if (!f.l.empty()) c.averaging_steps = parse_count(f.l);
  if (!f.t_tilde.empty()) {
    if (c.h.size() != 1) throw sdews::ConfigError("--T-tilde needs a single --h");
    c.averaging_steps = sdews::steps_for_horizon(parse_real(f.t_tilde), c.h[0]);
  }
  if (!f.seed.empty()) c.seed = parse_count(f.seed);
  if (!f.radius.empty()) c.rejection_radius = parse_real(f.radius);
  if (!f.noise.empty()) {
    if (f.noise == "gaussian") {
      c.noise = sdews::NoiseKind::kGaussian;
    } else if (f.noise == "rademacher") {
      c.noise = sdews::NoiseKind::kRademacher;
    } else {
      throw sdews::ConfigError("--noise: expected gaussian or rademacher");
    }
  }
  if (!f.ordering.empty()) c.ordering = parse_ordering(f.ordering);
  if (!f.policy.empty()) c.policy = f.policy;
  if (!f.betas.empty()) c.betas = parse_real_list(f.betas);
  if (!f.q.empty()) {
    const auto flat = parse_real_list(f.q);
    std::size_t n = 0;
    while (n * n < flat.size()) ++n;
    if (n * n != flat.size()) throw sdews::ConfigError("--q must have n*n entries");
    c.q.assign(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n * n; ++i) c.q[i / n][i % n] = flat[i];
    if (f.policy.empty()) c.policy = "constant";
  }
  if (!f.workers.empty()) c.workers = static_cast<std::size_t>(parse_count(f.workers));
  if (!f.out.empty()) c.output_dir = f.out;
  if (!f.grid.empty()) c.grid = parse_grid(f.grid);
  if (!f.delta.empty()) c.delta = parse_real(f.delta);
  if (!f.tolerance.empty()) c.tolerance = parse_real(f.tolerance);
  if (!f.observable.empty()) c.observable = f.observable;
  if (!f.reference.empty()) c.reference = parse_real(f.reference);
  if (!f.x0.empty() || !f.regime.empty()) {
    sdews::FixedPoint fp = c.initial.value_or(sdews::FixedPoint{});
    if (!f.x0.empty()) fp.x0 = parse_real_list(f.x0);
    if (!f.regime.empty()) fp.regime = static_cast<std::size_t>(parse_count(f.regime));
    c.initial = fp;
  }
  if (!f.bins.empty() || !f.range.empty()) {
    const std::size_t d = build_model(c).dimension();
    sdews::HistogramSpec spec =
        c.histogram.value_or(sdews::HistogramSpec::default_for(d));
    if (!f.bins.empty()) spec.bins.assign(d, static_cast<std::size_t>(parse_count(f.bins)));
    if (!f.range.empty()) {
      const std::size_t colon = f.range.find(':', 1);
      if (colon == std::string::npos) throw sdews::ConfigError("--range must be lo:hi");
      spec.lo.assign(d, parse_real(f.range.substr(0, colon)));
      spec.hi.assign(d, parse_real(f.range.substr(colon + 1)));
    }
    spec.validate();
    c.histogram = spec;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampling finite mixtures with switching diffusions"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  Flags flags;
  const std::map<std::string, std::string> about = {
      {"sample", "simulate trajectories and write the terminal histogram"},
      {"converge", "weak-error study over a list of step sizes"},
      {"tvd", "total variation distance to the exact mixture over step sizes"},
      {"time-average", "ergodic average along single trajectories"},
      {"fpe-check", "stationary Fokker-Planck residual on a grid"},
      {"oracle", "compute reference values for the presets"},
      {"ctmc-check", "switching-only chain vs the matrix exponential"}};
  for (const auto& name : command_names()) {
    add_flags(app.add_subcommand(name, about.at(name)), flags);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfigError);
  }

  try {
    RunConfig config;
    apply_flags(flags, app.get_subcommands().front()->get_name(), config);
    finalize(config);
    return run(config, std::cout);
  } catch (const sdews::StepSizeViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumericalGuard);
  } catch (const sdews::NumericalGuardError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumericalGuard);
  } catch (const sdews::OracleFailure& e) {
    std::cerr << "oracle failure: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kOracleFailure);
  } catch (const sdews::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfigError);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfigError);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
