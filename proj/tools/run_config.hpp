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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdews/estimators.hpp"
#include "sdews/integrator.hpp"
#include "sdews/mixture_model.hpp"
#include "sdews/oracles.hpp"
#include "sdews/switching.hpp"

namespace sdews::cli {

inline constexpr const char* kOutputDirEnv = "SDEWS_OUTPUT_DIR";
inline constexpr const char* kDefaultOutputDir = "sdews_out";

const std::vector<std::string>& command_names();

/// Fully resolved run description. Every field has a value after loading, so
/// the JSON echo in the manifest reproduces the run exactly.
struct RunConfig {
  std::string command;

  // Mixture: a preset name or an inline component list (kept as JSON).
  nlohmann::json mixture = "example1";

  // "density", "density_scaled" or "constant".
  std::string policy = "density";
  std::vector<double> betas;
  std::vector<std::vector<double>> q;

  std::vector<double> h;  // one entry except for converge / tvd
  double horizon = 100.0;
  std::uint64_t trajectories = 100000;
  std::optional<std::uint64_t> averaging_steps;
  NoiseKind noise = NoiseKind::kGaussian;
  StepOrdering ordering = StepOrdering::kSwitchFirst;
  std::optional<double> rejection_radius;
  std::uint64_t seed = kDefaultSeed;
  std::optional<std::string> observable;
  std::optional<HistogramSpec> histogram;
  std::optional<double> reference;
  std::optional<FixedPoint> initial;
  GridSpec grid;
  double delta = kDefaultFdStep;
  double tolerance = 1e-6;
  std::string output_dir;
  std::size_t workers = 0;
};

/// Parses a config (or a previously written manifest) and validates it
/// against the schema. Errors are ConfigError with a line reference.
RunConfig parse_config(std::string_view text, std::string_view source = "config");
RunConfig load_config_file(const std::string& path);

/// Checks cross-field constraints once flags and file values are merged.
void finalize(RunConfig& config);

nlohmann::json to_json(const RunConfig& config);

/// Exact non-negative integer from decimal or scientific notation
/// ("1e6", "2.5e3", "9223372036854775807"); at most 2^63 - 1.
std::uint64_t parse_count(std::string_view text);
double parse_real(std::string_view text);
StepOrdering parse_ordering(std::string_view text);
std::vector<double> parse_real_list(std::string_view text);
GridSpec parse_grid(std::string_view text);

MixtureModel build_model(const RunConfig& config);
RatePolicy build_policy(const RunConfig& config, const MixtureModel* model);
ObservableSpec build_observable(const RunConfig& config, std::size_t dimension);

}  // namespace sdews::cli
