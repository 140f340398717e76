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
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "sdews/mixture_model.hpp"

namespace sdews {

/// q_{jm}(x) = rho(x; m) for every j != m.
struct DensityProportional {};

/// q_{jm}(x) = rho(x; m) / (beta_m beta_j).
struct DensityScaled {
  std::vector<double> betas;
};

/// x-independent off-diagonal rates; row-major m0 x m0, diagonal ignored.
struct ConstantMatrix {
  std::size_t regimes = 0;
  std::vector<double> q;
};

/// Fills the row-major m0 x m0 off-diagonal rates at x; diagonal is ignored.
/// `bound`, when given, must dominate q_i(x) for every i and x.
struct CustomRates {
  std::function<void(std::span<const double> x, std::span<double> q)> fill;
  std::optional<double> bound;
};

using RatePolicyKind =
    std::variant<DensityProportional, DensityScaled, ConstantMatrix, CustomRates>;

/// Q(x) evaluated at a point. Off-diagonal entries are non-negative and the
/// diagonal is -q_i(x) with q_i the row sum of the off-diagonal entries.
class RateMatrix {
 public:
  RateMatrix() = default;
  explicit RateMatrix(std::size_t regimes);

  std::size_t regimes() const { return regimes_; }
  // Off-diagonal q_{ij}; q(i, i) returns -q_i.
  double q(std::size_t i, std::size_t j) const { return q_[i * regimes_ + j]; }
  double total_rate(std::size_t i) const { return -q(i, i); }
  std::span<const double> row(std::size_t i) const {
    return {q_.data() + i * regimes_, regimes_};
  }

  // Sets q_{ij}; call finalize() afterwards to rebuild the diagonal.
  void set(std::size_t i, std::size_t j, double value) {
    q_[i * regimes_ + j] = value;
  }
  void finalize();

  static RateMatrix from_off_diagonal(std::size_t regimes,
                                      std::span<const double> q);

 private:
  std::size_t regimes_ = 0;
  std::vector<double> q_;
};

/// Rule producing Q(x). Immutable and thread-safe once built.
class RatePolicy {
 public:
  RatePolicy(RatePolicyKind kind);  // NOLINT(google-explicit-constructor)

  static RatePolicy density() { return RatePolicy(DensityProportional{}); }
  static RatePolicy density_scaled(std::vector<double> betas) {
    return RatePolicy(DensityScaled{std::move(betas)});
  }
  static RatePolicy constant(std::size_t regimes, std::vector<double> q) {
    return RatePolicy(ConstantMatrix{regimes, std::move(q)});
  }

  const RatePolicyKind& kind() const { return kind_; }
  bool uses_model() const;

  /// Throws ConfigError if the policy does not fit the model (sizes).
  void validate(const MixtureModel* model) const;

  /// Analytic bound on q_i(x) over all x for regime i, if one is known.
  std::optional<double> regime_bound(const MixtureModel* model,
                                     std::size_t i) const;
  /// l = max_i sup_x q_i(x), when an analytic bound is known.
  std::optional<double> rate_bound(const MixtureModel* model) const;

  /// Off-diagonal row i of Q(x) into `out` (size m0, out[i] = 0). Returns q_i.
  double row(const MixtureModel* model, std::span<const double> x,
             std::size_t i, std::span<double> out) const;

 private:
  RatePolicyKind kind_;
};

/// Full Q(x) for the policy. The model may be null for policies that do not
/// reference densities.
RateMatrix evaluate_rates(const RatePolicy& policy, const MixtureModel* model,
                          std::span<const double> x);
inline RateMatrix evaluate_rates(const RatePolicy& policy,
                                 const MixtureModel& model,
                                 std::span<const double> x) {
  return evaluate_rates(policy, &model, x);
}

/// Largest violation of q_{jm}/q_{mj} = rho(x;m)/rho(x;j) in log space.
struct DetailedBalanceResult {
  double residual = 0.0;
  // Ordered pairs (j, m) skipped because a density or rate underflowed.
  std::vector<std::pair<std::size_t, std::size_t>> skipped;
};

DetailedBalanceResult detailed_balance_residual(const RatePolicy& policy,
                                                const MixtureModel& model,
                                                std::span<const double> x);

/// One Euler switching decision: [0, 1) is split into consecutive intervals of
/// length q_{mu j} h for j != mu in increasing j, then the stay interval.
/// Throws StepSizeViolation when h q_mu > 1.
std::size_t switch_step(const RateMatrix& rates, std::size_t mu, double h,
                        double u, std::span<const double> x = {});

/// Same decision from a single row of rates (as produced by RatePolicy::row).
std::size_t switch_step_row(std::span<const double> row, double total_rate,
                            std::size_t mu, double h, double u,
                            std::span<const double> x = {});

/// Left-closed right-open interval; empty when lo == hi.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return !(hi > lo); }
  bool contains(double z) const { return z >= lo && z < hi; }
};

/// Stacked intervals Gamma_{ij}(x) with |Gamma_{ij}| = q_{ij}(x), laid out row
/// by row (i increasing) and within a row by j increasing.
class SkorokhodTable {
 public:
  SkorokhodTable(const RateMatrix& rates, std::optional<double> ell);

  std::size_t regimes() const { return regimes_; }
  const Interval& interval(std::size_t i, std::size_t j) const {
    return intervals_[i * regimes_ + j];
  }
  // Start of row i in the stacked layout.
  double row_offset(std::size_t i) const { return row_offsets_[i]; }
  // L = m0 (m0 - 1) l.
  double bound() const { return bound_; }
  double ell() const { return ell_; }

  /// F(x, i, z) = sum_j (j - i) 1{z in Gamma_{ij}}.
  long jump(std::size_t i, double z) const;

 private:
  std::size_t regimes_;
  std::vector<Interval> intervals_;
  std::vector<double> row_offsets_;
  double ell_;
  double bound_;
};

/// Builds the table; `ell` defaults to max_i q_i(x) at this point.
SkorokhodTable skorokhod_intervals(const RateMatrix& rates,
                                   std::optional<double> ell = std::nullopt);

}  // namespace sdews
