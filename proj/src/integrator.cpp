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

#include "sdews/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sdews/error.hpp"
#include "sdews/parallel.hpp"

namespace sdews {

SdewsSystem::SdewsSystem(Kind kind, std::size_t dimension, std::size_t regimes,
                         RatePolicy policy, std::optional<MixtureModel> model)
    : kind_(kind),
      dimension_(dimension),
      regimes_(regimes),
      policy_(std::move(policy)),
      model_(std::move(model)) {
  if (dimension_ == 0 || regimes_ == 0) {
    throw ConfigError("system needs a positive dimension and regime count");
  }
  policy_.validate(model_ ? &*model_ : nullptr);
  if (const auto* c = std::get_if<ConstantMatrix>(&policy_.kind())) {
    if (c->regimes != regimes_) {
      throw ConfigError("constant rate matrix size does not match the regimes");
    }
  }
}

SdewsSystem SdewsSystem::ergodic(MixtureModel model, RatePolicy policy) {
  const std::size_t d = model.dimension();
  const std::size_t m0 = model.regimes();
  return SdewsSystem(Kind::kErgodicMixture, d, m0, std::move(policy),
                     std::move(model));
}

SdewsSystem SdewsSystem::general(std::size_t dimension, std::size_t regimes,
                                 DriftFn drift, DiffusionFn diffusion,
                                 RatePolicy policy,
                                 std::optional<MixtureModel> model) {
  if (!drift || !diffusion) {
    throw ConfigError("general systems need drift and diffusion functions");
  }
  if (model && (model->dimension() != dimension || model->regimes() != regimes)) {
    throw ConfigError("mixture model does not match the system shape");
  }
  SdewsSystem s(Kind::kGeneral, dimension, regimes, std::move(policy),
                std::move(model));
  s.drift_ = std::move(drift);
  s.diffusion_ = std::move(diffusion);
  return s;
}

void SdewsSystem::drift(double t, std::span<const double> x, std::size_t m,
                        std::span<double> out) const {
  if (kind_ == Kind::kErgodicMixture) {
    model_->components()[m].gradient(x, out);
    for (double& v : out) v *= -0.5;
    return;
  }
  drift_(t, x, m, out);
}

void SdewsSystem::diffusion(double t, std::span<const double> x, std::size_t m,
                            std::span<double> out) const {
  if (kind_ == Kind::kErgodicMixture) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < dimension_; ++i) out[i * dimension_ + i] = 1.0;
    return;
  }
  diffusion_(t, x, m, out);
}

std::uint64_t steps_for_horizon(double horizon, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("step h must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw ConfigError("horizon must be non-negative");
  }
  const double ratio = horizon / h;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("horizon " + std::to_string(horizon) +
                      " is not a whole number of steps of size " +
                      std::to_string(h));
  }
  return static_cast<std::uint64_t>(n);
}

void SimulationPlan::validate(const SdewsSystem& system) const {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("step h must be positive");
  if (trajectories < 1) throw ConfigError("trajectory count M must be >= 1");
  if (rejection_radius && !(*rejection_radius > 0.0)) {
    throw ConfigError("rejection radius must be positive");
  }
  if (const auto* fp = std::get_if<FixedPoint>(&initial)) {
    if (fp->x0.size() != system.dimension()) {
      throw ConfigError("initial point has the wrong dimension");
    }
    if (fp->regime >= system.regimes()) {
      throw ConfigError("initial regime out of range");
    }
  } else if (system.model() == nullptr) {
    throw ConfigError("uniform component-mean start needs a mixture model");
  }
  if (const auto ell = system.policy().rate_bound(system.model())) {
    if (h * *ell > 1.0) {
      throw StepSizeViolation({}, 0, *ell, h);
    }
  }
}

namespace {

// X_{k+1} = X_k + h a + sqrt(h) sigma xi, shared by euler_step and the runner
// so both produce identical bits.
void update_position(const SdewsSystem& system, std::span<double> x,
                     std::size_t mu, double t, double h, double sqrt_h,
                     std::span<const double> xi, std::span<double> drift,
                     std::span<double> diffusion) {
  const std::size_t d = system.dimension();
  system.drift(t, x, mu, drift);
  if (system.kind() == SdewsSystem::Kind::kErgodicMixture) {
    for (std::size_t i = 0; i < d; ++i) x[i] = x[i] + h * drift[i] + sqrt_h * xi[i];
    return;
  }
  system.diffusion(t, x, mu, diffusion);
  for (std::size_t i = 0; i < d; ++i) {
    double noise = 0.0;
    for (std::size_t j = 0; j < d; ++j) noise += diffusion[i * d + j] * xi[j];
    drift[i] = h * drift[i] + sqrt_h * noise;  // reuse as increment
  }
  for (std::size_t i = 0; i < d; ++i) x[i] += drift[i];
}

// Applies the rejection rule; returns true if the state was parked. A
// non-finite coordinate makes norm2 NaN or inf, so one comparison covers both.
bool apply_rejection(TrajectoryState& state, std::optional<double> radius) {
  double norm2 = 0.0;
  for (double v : state.x) norm2 += v * v;
  if (radius) {
    if (!(norm2 < *radius * *radius)) {
      std::fill(state.x.begin(), state.x.end(), 0.0);
      state.rejected = true;
      return true;
    }
    return false;
  }
  if (!std::isfinite(norm2)) {
    throw NumericalGuardError(
        "state became non-finite (or overflowed) at step " +
        std::to_string(state.k) + "; set a rejection radius or reduce h");
  }
  return false;
}

}  // namespace

TrajectoryState euler_step(const SdewsSystem& system,
                           const TrajectoryState& state, double t, double h,
                           std::span<const double> xi, double u,
                           std::optional<double> rejection_radius,
                           StepOrdering ordering) {
  const std::size_t d = system.dimension();
  if (state.rejected) {
    throw std::logic_error("euler_step called on a rejected trajectory");
  }
  if (xi.size() != d || state.x.size() != d) {
    throw std::invalid_argument("noise/state dimension mismatch in euler_step");
  }
  // Switching reads X_k before the position update.
  std::vector<double> row(system.regimes());
  const double total =
      system.policy().row(system.model(), state.x, state.mu, row);
  const std::size_t next_mu =
      switch_step_row(row, total, state.mu, h, u, state.x);

  TrajectoryState next = state;
  std::vector<double> drift(d);
  std::vector<double> diffusion(d * d);
  const std::size_t drift_mu =
      ordering == StepOrdering::kSwitchFirst ? next_mu : state.mu;
  update_position(system, next.x, drift_mu, t, h, std::sqrt(h), xi, drift,
                  diffusion);
  next.mu = next_mu;
  next.k = state.k + 1;
  apply_rejection(next, rejection_radius);
  return next;
}

TrajectoryState initial_state(const SimulationPlan& plan,
                              const SdewsSystem& system, RandomStream& stream) {
  TrajectoryState state;
  if (const auto* fp = std::get_if<FixedPoint>(&plan.initial)) {
    state.x = fp->x0;
    state.mu = fp->regime;
    return state;
  }
  const MixtureModel* model = system.model();
  if (model == nullptr) {
    throw ConfigError("uniform component-mean start needs a mixture model");
  }
  const std::size_t m0 = model->regimes();
  std::size_t mu = 0;
  if (m0 > 1) {
    mu = static_cast<std::size_t>(stream.uniform() * static_cast<double>(m0));
    mu = std::min(mu, m0 - 1);
  }
  state.mu = mu;
  state.x = model->components()[mu].init_point();
  return state;
}

std::vector<double> noise_sample(NoiseGenerator& generator, std::size_t d) {
  std::vector<double> out(d);
  generator.sample(out);
  return out;
}

TrajectoryRunner::TrajectoryRunner(const SdewsSystem& system,
                                   const SimulationPlan& plan)
    : system_(system),
      plan_(plan),
      sqrt_h_(std::sqrt(plan.h)),
      stay_threshold_(system.regimes(), 2.0),
      xi_(system.dimension()),
      drift_(system.dimension()),
      diffusion_(system.dimension() * system.dimension()),
      row_(system.regimes()) {
  if (system.kind() == SdewsSystem::Kind::kErgodicMixture) {
    components_ = &system.model()->components();
  }
  if (plan.rejection_radius) {
    radius2_ = *plan.rejection_radius * *plan.rejection_radius;
  }
  for (std::size_t i = 0; i < system.regimes(); ++i) {
    if (const auto bound = system.policy().regime_bound(system.model(), i)) {
      // Padded by 1e-12 relative to h * bound.
      stay_threshold_[i] = *bound * plan.h * (1.0 + 1e-12);
    }
  }
}

std::size_t TrajectoryRunner::next_regime(const TrajectoryState& state,
                                          double u) {
  if (u >= stay_threshold_[state.mu]) return state.mu;
  const double total =
      system_.policy().row(system_.model(), state.x, state.mu, row_);
  return switch_step_row(row_, total, state.mu, plan_.h, u, state.x);
}

void TrajectoryRunner::advance(TrajectoryState& state, NoiseGenerator& gen) {
  ++state.k;
  if (state.rejected) return;
  // Draw order within a step: d noise components, then the switching uniform.
  gen.sample(xi_);
  const double u = gen.uniform();
  const std::size_t next_mu = next_regime(state, u);
  const std::size_t drift_mu =
      plan_.ordering == StepOrdering::kSwitchFirst ? next_mu : state.mu;
  state.mu = next_mu;
  if (components_ != nullptr) {
    // Same arithmetic as update_position for the ergodic kind.
    (*components_)[drift_mu].gradient(state.x, drift_);
    const std::size_t d = xi_.size();
    double* x = state.x.data();
    double norm2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = x[i] + plan_.h * (drift_[i] * -0.5) + sqrt_h_ * xi_[i];
      norm2 += x[i] * x[i];
    }
    if (radius2_ ? norm2 < *radius2_ : std::isfinite(norm2)) return;
  } else {
    const double t = static_cast<double>(state.k - 1) * plan_.h;
    update_position(system_, state.x, drift_mu, t, plan_.h, sqrt_h_, xi_,
                    drift_, diffusion_);
  }
  apply_rejection(state, plan_.rejection_radius);
}

TrajectoryState TrajectoryRunner::run(std::uint64_t index) {
  return run_path(index, plan_.steps, [](const TrajectoryState&) {});
}

EndpointBatch simulate_endpoint(const SdewsSystem& system,
                                const SimulationPlan& plan) {
  plan.validate(system);
  using Block = std::vector<TrajectoryState>;
  auto blocks = run_blocks<Block>(
      plan.trajectories, plan.workers,
      [&](std::size_t, std::uint64_t begin, std::uint64_t end) {
        TrajectoryRunner runner(system, plan);
        Block out;
        out.reserve(end - begin);
        for (std::uint64_t i = begin; i < end; ++i) out.push_back(runner.run(i));
        return out;
      });
  EndpointBatch batch;
  batch.states.reserve(plan.trajectories);
  for (auto& b : blocks) {
    for (auto& s : b) {
      batch.rejected += s.rejected ? 1 : 0;
      batch.states.push_back(std::move(s));
    }
  }
  return batch;
}

}  // namespace sdews
