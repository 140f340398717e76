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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdews/integrator.hpp"
#include "sdews/mixture_model.hpp"
#include "sdews/quadrature.hpp"
#include "sdews/switching.hpp"

namespace sdews {

// ---------------------------------------------------------------------------
// Stationary Fokker-Planck residual

inline constexpr double kDefaultFdStep = 1e-4;

struct FpeResidual {
  double residual = 0.0;
  bool skipped = false;  // density at x underflowed
};

/// |L* rho(x; m)| for rho(x; m) = alpha_m exp(-U(x; m)) where
///   L* rho_m = 1/2 lap rho_m + 1/2 div(rho_m grad U_m) - q_m rho_m
///              + sum_{j != m} q_{jm} rho_j.
/// The continuous part uses central differences of rho and of U with step
/// `delta`; the jump part is evaluated from the policy directly.
FpeResidual stationary_fpe_residual(const MixtureModel& model,
                                    const RatePolicy& policy,
                                    std::span<const double> x, std::size_t m,
                                    double delta = kDefaultFdStep);

/// Tensor grid lo:hi:step on every axis.
struct GridSpec {
  double lo = -6.0;
  double hi = 6.0;
  double step = 0.25;

  std::vector<double> points() const;
};

struct FpeGridResult {
  double max_residual = 0.0;
  std::vector<double> argmax;
  std::size_t argmax_regime = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

/// Maximum residual over the grid (in every dimension of the model) and all
/// regimes.
FpeGridResult fpe_grid_check(const MixtureModel& model, const RatePolicy& policy,
                             const GridSpec& grid,
                             double delta = kDefaultFdStep);

// ---------------------------------------------------------------------------
// Constant-rate chains

inline constexpr std::size_t kMaxCtmcRegimes = 8;

/// p(t) = p0 exp(t Q) (row vector convention, i.e. exp(t Q^T) p0 as a column).
std::vector<double> ctmc_marginal(const RateMatrix& q, std::span<const double> p0,
                                  double t);

// ---------------------------------------------------------------------------
// Linear switching test problem (dX = -a_m X dt + sigma_m dw)

struct LinearSdewsSpec {
  std::vector<double> a;
  std::vector<double> sigma;
  RateMatrix q;
  double x0 = 0.0;
  std::size_t m0 = 0;
  double horizon = 1.0;

  std::size_t regimes() const { return a.size(); }
  void validate() const;

  /// a = (1, 0.2), sigma = (1, 0.5), q_01 = q_10 = 1, x0 = 1, m0 = 0, T = 1.
  static LinearSdewsSpec two_regime_instance();
};

struct LinearMomentResult {
  std::vector<double> p;   // P(mu(T) = m)
  std::vector<double> m2;  // E[X(T)^2 1{mu(T) = m}]
  double second_moment = 0.0;
  double oracle_error = 0.0;  // step-halving difference
};

/// Solves the closed moment ODE system with classical RK4 (step 1e-4 T) and
/// checks it against the half-step solution. Throws OracleFailure when the
/// two disagree by more than 1e-10.
LinearMomentResult linear_moment_reference(const LinearSdewsSpec& spec);

/// SdewsSystem with the linear drift, constant diffusion and constant rates.
SdewsSystem linear_system(const LinearSdewsSpec& spec);

// ---------------------------------------------------------------------------
// Fixtures

struct OracleFixture {
  std::string name;
  double value = 0.0;
  double oracle_error = 0.0;
  std::string method;
};

nlohmann::json to_json(const OracleFixture& fixture);
OracleFixture fixture_from_json(const nlohmann::json& j);

/// Every reference value used by the acceptance suite.
std::vector<OracleFixture> standard_fixtures();

/// Reference values for one preset: Z and the ergodic limit of its observable.
std::vector<OracleFixture> preset_fixtures(const std::string& preset_name);

}  // namespace sdews
