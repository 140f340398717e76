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
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "sdews/mixture_model.hpp"
#include "sdews/random.hpp"
#include "sdews/switching.hpp"

namespace sdews {

inline constexpr std::uint64_t kDefaultSeed = 20240917;

using DriftFn = std::function<void(double t, std::span<const double> x,
                                   std::size_t m, std::span<double> out)>;
// Fills the d x d diffusion matrix (row-major).
using DiffusionFn = std::function<void(double t, std::span<const double> x,
                                       std::size_t m, std::span<double> out)>;

/// Diffusion with state-dependent switching:
///   dX = a(t, X, mu) dt + sigma(t, X, mu) dw,  mu jumps with rates Q(X).
/// The ergodic kind fixes a = -grad U / 2 and sigma = I for a mixture target.
class SdewsSystem {
 public:
  enum class Kind { kGeneral, kErgodicMixture };

  static SdewsSystem ergodic(MixtureModel model, RatePolicy policy);
  static SdewsSystem general(std::size_t dimension, std::size_t regimes,
                             DriftFn drift, DiffusionFn diffusion,
                             RatePolicy policy,
                             std::optional<MixtureModel> model = std::nullopt);

  Kind kind() const { return kind_; }
  std::size_t dimension() const { return dimension_; }
  std::size_t regimes() const { return regimes_; }
  const RatePolicy& policy() const { return policy_; }
  const MixtureModel* model() const { return model_ ? &*model_ : nullptr; }

  void drift(double t, std::span<const double> x, std::size_t m,
             std::span<double> out) const;
  void diffusion(double t, std::span<const double> x, std::size_t m,
                 std::span<double> out) const;

 private:
  SdewsSystem(Kind kind, std::size_t dimension, std::size_t regimes,
              RatePolicy policy, std::optional<MixtureModel> model);

  Kind kind_;
  std::size_t dimension_;
  std::size_t regimes_;
  RatePolicy policy_;
  std::optional<MixtureModel> model_;
  DriftFn drift_;
  DiffusionFn diffusion_;
};

struct FixedPoint {
  std::vector<double> x0;
  std::size_t regime = 0;
};
/// mu(0) uniform over the regimes, X(0) at that component's init_point.
struct UniformRegimeComponentMean {};
using InitialCondition = std::variant<UniformRegimeComponentMean, FixedPoint>;

/// Order of the two updates within a step. Switching always reads X_k.
///   kSwitchFirst:  mu_{k+1} from Q(X_k), then X_{k+1} uses a(X_k, mu_{k+1}).
///   kSimultaneous: X_{k+1} uses a(X_k, mu_k), mu_{k+1} from Q(X_k).
enum class StepOrdering { kSwitchFirst, kSimultaneous };

/// Step h, horizon N steps (T = N h), M trajectories and, for time averaging,
/// L averaging steps. `workers` never changes results (0 = all cores).
struct SimulationPlan {
  double h = 0.1;
  std::uint64_t steps = 0;
  std::uint64_t trajectories = 1;
  std::uint64_t averaging_steps = 0;
  NoiseKind noise = NoiseKind::kGaussian;
  StepOrdering ordering = StepOrdering::kSwitchFirst;
  std::optional<double> rejection_radius;
  std::uint64_t seed = kDefaultSeed;
  InitialCondition initial = UniformRegimeComponentMean{};
  std::size_t workers = 0;

  double horizon() const { return static_cast<double>(steps) * h; }

  /// Structural checks plus h * l <= 1 for policies with an analytic bound.
  void validate(const SdewsSystem& system) const;
};

/// N = round(T / h); throws ConfigError if T / h is not (nearly) an integer.
std::uint64_t steps_for_horizon(double horizon, double h);

struct TrajectoryState {
  std::vector<double> x;
  std::size_t mu = 0;
  std::uint64_t k = 0;
  bool rejected = false;
};

/// One step of the Euler scheme. The switching uniform u selects mu_{k+1}
/// from the rates at X_k; `ordering` picks the regime used by the drift and
/// diffusion. With a rejection radius, |X_{k+1}| >= R or a non-finite X_{k+1} parks the state at
/// the origin; without one a non-finite state throws NumericalGuardError.
TrajectoryState euler_step(const SdewsSystem& system,
                           const TrajectoryState& state, double t, double h,
                           std::span<const double> xi, double u,
                           std::optional<double> rejection_radius = std::nullopt,
                           StepOrdering ordering = StepOrdering::kSwitchFirst);

/// Initial state of trajectory `index`; draws mu(0) from `stream` when the
/// policy is uniform.
TrajectoryState initial_state(const SimulationPlan& plan,
                              const SdewsSystem& system, RandomStream& stream);

/// d noise components from the generator.
std::vector<double> noise_sample(NoiseGenerator& generator, std::size_t d);

/// Simulates single trajectories for a fixed (system, plan). Holds the scratch
/// buffers, so one runner per worker thread.
class TrajectoryRunner {
 public:
  TrajectoryRunner(const SdewsSystem& system, const SimulationPlan& plan);

  /// State at step N of trajectory `index`.
  TrajectoryState run(std::uint64_t index);

  /// Advances trajectory `index` for `steps` steps, calling visit(state) after
  /// every step (k = 1..steps).
  template <class Visitor>
  TrajectoryState run_path(std::uint64_t index, std::uint64_t steps,
                           Visitor&& visit) {
    NoiseGenerator gen(plan_.noise, plan_.seed, index);
    TrajectoryState state = initial_state(plan_, system_, gen.stream());
    for (std::uint64_t k = 0; k < steps; ++k) {
      advance(state, gen);
      visit(static_cast<const TrajectoryState&>(state));
    }
    return state;
  }

 private:
  void advance(TrajectoryState& state, NoiseGenerator& gen);
  std::size_t next_regime(const TrajectoryState& state, double u);

  const SdewsSystem& system_;
  const SimulationPlan& plan_;
  double sqrt_h_;
  // Per-regime thresholds: u >= threshold means "stay" without evaluating Q.
  std::vector<double> stay_threshold_;
  std::vector<double> xi_;
  std::vector<double> drift_;
  std::vector<double> diffusion_;
  std::vector<double> row_;
  const std::vector<PotentialComponent>* components_ = nullptr;
  std::optional<double> radius2_;
};

/// All endpoint states (use only for moderate M) and the rejection count.
struct EndpointBatch {
  std::vector<TrajectoryState> states;
  std::uint64_t rejected = 0;
};
EndpointBatch simulate_endpoint(const SdewsSystem& system,
                                const SimulationPlan& plan);

}  // namespace sdews
