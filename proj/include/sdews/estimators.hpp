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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdews/integrator.hpp"
#include "sdews/mixture_model.hpp"

namespace sdews {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  void merge(const CompensatedSum& other) {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Sums of phi and phi^2 for the one-pass variance.
struct MomentAccumulator {
  CompensatedSum sum;
  CompensatedSum sum_sq;
  std::uint64_t count = 0;

  void add(double v) {
    sum.add(v);
    sum_sq.add(v * v);
    ++count;
  }
  void merge(const MomentAccumulator& other) {
    sum.merge(other.sum);
    sum_sq.merge(other.sum_sq);
    count += other.count;
  }
  double mean() const { return sum.value() / static_cast<double>(count); }
  /// D_M = (1/M) sum phi^2 - mean^2, clamped at zero.
  double variance() const;
};

/// One-pass sample variance (1/M) sum phi_k^2 - mean^2 of a sequence.
double one_pass_variance(std::span<const double> values);

class ObservableSpec {
 public:
  using Fn = std::function<double(std::span<const double> x, std::size_t m)>;
  enum class Kind { kSecondMoment, kSquaredNorm, kCustom };

  static ObservableSpec second_moment();
  static ObservableSpec squared_norm();
  static ObservableSpec custom(Fn fn, std::string name = "custom");
  static ObservableSpec from(Observable o);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  void validate(std::size_t dimension) const;

  double operator()(std::span<const double> x, std::size_t m) const {
    if (kind_ == Kind::kCustom) return fn_(x, m);
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  }

 private:
  Kind kind_ = Kind::kSquaredNorm;
  std::string name_;
  Fn fn_;
};

/// Uniform bins over [lo, hi) per axis; one or two axes.
struct HistogramSpec {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<std::size_t> bins;

  std::size_t dimension() const { return bins.size(); }
  std::size_t total_bins() const;
  double width(std::size_t axis) const {
    return (hi[axis] - lo[axis]) / static_cast<double>(bins[axis]);
  }
  void validate() const;

  /// [-12, 12] with 480 bins in 1D, [-8, 8]^2 with 160 x 160 bins in 2D.
  static HistogramSpec default_for(std::size_t dimension);
};

class Histogram {
 public:
  Histogram() = default;
  explicit Histogram(HistogramSpec spec);

  const HistogramSpec& spec() const { return spec_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total() const { return total_; }
  std::uint64_t out_of_range() const { return out_of_range_; }

  /// Flat bin index (x-major in 2D) or nullopt when outside the range.
  std::optional<std::size_t> bin_of(std::span<const double> x) const;
  void add(std::span<const double> x);
  void merge(const Histogram& other);

 private:
  HistogramSpec spec_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::uint64_t out_of_range_ = 0;
};

/// Exact probability of every bin under the normalized mixture.
std::vector<double> exact_bin_masses(const MixtureModel& model,
                                     const HistogramSpec& spec);

struct TvdResult {
  double tvd = 0.0;
  double exact_in_range = 0.0;
  double empirical_in_range = 0.0;
  std::vector<std::string> warnings;
};

/// 1/2 [ sum_b |p^_b - p_b| + (1 - sum p_b) + (1 - sum p^_b) ].
TvdResult tvd_from_masses(const Histogram& histogram,
                          std::span<const double> exact_masses);
TvdResult tvd_estimate(const Histogram& histogram, const MixtureModel& model);
TvdResult tvd_estimate(std::span<const std::vector<double>> samples,
                       const MixtureModel& model, const HistogramSpec& spec);

struct EstimatorReport {
  double estimate = 0.0;
  std::optional<double> mc_half_width;   // 2 sqrt(D_M / M)
  std::optional<double> sample_variance; // D_M
  std::uint64_t samples = 0;
  std::uint64_t rejected_count = 0;
  std::optional<Histogram> histogram;
  std::optional<double> tvd;
  std::vector<std::string> warnings;
  nlohmann::json manifest;
};

nlohmann::json plan_to_json(const SimulationPlan& plan);

/// Ensemble average of phi(X_N, mu_N) over plan.trajectories independent
/// trajectories. When `histogram` is given the endpoints are binned and, for
/// ergodic systems, the TVD against the exact mixture is reported.
EstimatorReport ensemble_estimate(const SdewsSystem& system,
                                  const SimulationPlan& plan,
                                  const ObservableSpec& observable,
                                  const std::optional<HistogramSpec>& histogram =
                                      std::nullopt);

/// Running average (1/L) sum_{l=1}^{L} phi(X_l, mu_l) along one trajectory with
/// L = plan.averaging_steps. With plan.trajectories = R >= 2 independent
/// replicas are averaged and their spread gives the half-width.
EstimatorReport time_average_estimate(const SdewsSystem& system,
                                      const SimulationPlan& plan,
                                      const ObservableSpec& observable);

/// Number of trajectories in each regime at step N, plus rejections.
struct RegimeOccupation {
  std::vector<std::uint64_t> counts;
  std::uint64_t rejected = 0;
};
RegimeOccupation regime_occupation(const SdewsSystem& system,
                                   const SimulationPlan& plan);

struct ConvergenceRow {
  double h = 0.0;
  std::uint64_t trajectories = 0;
  double horizon = 0.0;
  double estimate = 0.0;
  double error = 0.0;
  double mc_half_width = 0.0;
  std::optional<double> tvd;
  std::uint64_t rejected = 0;
  std::uint64_t seed = 0;
  bool in_fit = false;  // |error| >= 2 * mc_half_width
};

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

/// Weighted least squares of log y against log x. Needs two distinct x.
std::optional<LogLogFit> fit_loglog(std::span<const double> x,
                                    std::span<const double> y,
                                    std::span<const double> weights);

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  std::optional<LogLogFit> bias_fit;  // weights 1 / mc_half_width^2
  std::optional<LogLogFit> tvd_fit;   // unweighted
};

/// One ensemble run per step size with the horizon held fixed. Each row uses
/// the seed mix_seed(plan.seed, bits(h)). `on_row` sees every finished row;
/// a failing row aborts the study after earlier rows have been delivered.
ConvergenceStudy convergence_study(
    const SdewsSystem& system, const SimulationPlan& plan_template,
    double horizon, std::span<const double> steps,
    const ObservableSpec& observable, double reference,
    const std::optional<HistogramSpec>& histogram = std::nullopt,
    const std::function<void(const ConvergenceRow&)>& on_row = {});

/// Fits both slopes for existing rows (used after partial studies too).
void fit_study(ConvergenceStudy& study);

/// CSV with header h,M,T,phi_hat,error,mc_half_width,tvd.
std::string convergence_csv(const ConvergenceStudy& study);

/// Histogram CSV: bin_lo,bin_hi,[bin_lo_y,bin_hi_y,]count,empirical_density,
/// exact_density (densities per unit length/area).
std::string histogram_csv(const Histogram& histogram,
                          std::span<const double> exact_masses);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace sdews
