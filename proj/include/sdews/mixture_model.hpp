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
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sdews {

/// Gaussian component potential U(x) = 1/2 (x - mean)^T Sigma^{-1} (x - mean).
struct GaussianPotential {
  std::vector<double> mean;
  std::vector<double> covariance;  // row-major d x d, symmetric positive definite
};

/// One-dimensional double well U(x) = beta (x^4 - 4 x^2).
struct QuarticPotential {
  double beta = 0.0;
};

/// Placeholder for tabulated potentials; accepted by the schema, rejected on use.
struct CustomGridPotential {};

using PotentialKind =
    std::variant<GaussianPotential, QuarticPotential, CustomGridPotential>;

/// A single weighted Gibbs component alpha * exp(-U(x)).
///
/// Construction validates the parameters and precomputes the precision matrix
/// and log-determinant for Gaussian components. Instances are immutable.
class PotentialComponent {
 public:
  PotentialComponent(PotentialKind kind, double alpha,
                     std::vector<double> init_point = {});

  static PotentialComponent Gaussian(std::vector<double> mean,
                                     std::vector<double> covariance,
                                     double alpha);
  static PotentialComponent Quartic(double beta, double alpha);

  std::size_t dimension() const { return dimension_; }
  double alpha() const { return alpha_; }
  double log_alpha() const { return log_alpha_; }
  const PotentialKind& kind() const { return kind_; }
  const std::vector<double>& init_point() const { return init_point_; }

  bool is_gaussian() const {
    return std::holds_alternative<GaussianPotential>(kind_);
  }
  const GaussianPotential& gaussian() const {
    return std::get<GaussianPotential>(kind_);
  }
  double log_det_covariance() const { return log_det_cov_; }

  double potential(std::span<const double> x) const;

  void gradient(std::span<const double> x, std::span<double> out) const {
    if (quartic_) {
      out[0] = beta_ * (4.0 * x[0] * x[0] * x[0] - 8.0 * x[0]);
      return;
    }
    const std::size_t d = dimension_;
    const double* p = precision_.data();
    const double* m = mean_.data();
    for (std::size_t i = 0; i < d; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < d; ++j) row += p[i * d + j] * (x[j] - m[j]);
      out[i] = row;
    }
  }

  // Infimum of U over R^d (0 for Gaussians, -4 beta for the quartic well).
  double potential_infimum() const;
  // sup_x alpha exp(-U(x)).
  double density_supremum() const;

 private:
  PotentialKind kind_;
  double alpha_;
  double log_alpha_;
  std::size_t dimension_;
  std::vector<double> init_point_;
  std::vector<double> precision_;  // Gaussian only, row-major
  std::vector<double> mean_;       // Gaussian only
  bool quartic_ = false;
  double beta_ = 0.0;
  double log_det_cov_ = 0.0;
};

/// Unnormalized finite mixture rho(x) = sum_m alpha_m exp(-U(x; m)).
///
/// Regimes are indexed from 0. The model is immutable after construction and
/// may be shared between threads.
class MixtureModel {
 public:
  explicit MixtureModel(std::vector<PotentialComponent> components);

  std::size_t dimension() const { return dimension_; }
  std::size_t regimes() const { return components_.size(); }
  const PotentialComponent& component(std::size_t m) const;
  const std::vector<PotentialComponent>& components() const {
    return components_;
  }
  bool all_gaussian() const;

  double potential(std::span<const double> x, std::size_t m) const;
  void grad_potential(std::span<const double> x, std::size_t m,
                      std::span<double> out) const;

  // ln alpha_m - U(x; m); finite wherever U is.
  double weighted_log_density(std::span<const double> x, std::size_t m) const;
  // alpha_m exp(-U(x; m)); zero below exp(-700).
  double weighted_density(std::span<const double> x, std::size_t m) const;
  // sum over components.
  double mixture_density(std::span<const double> x) const;

 private:
  void check_point(std::span<const double> x, std::size_t m) const;

  std::vector<PotentialComponent> components_;
  std::size_t dimension_;
};

// Densities below exp(kLogUnderflow) are reported as zero in linear space.
inline constexpr double kLogUnderflow = -700.0;

/// Test functions with known ergodic references.
enum class Observable { kSecondMoment, kSquaredNorm };

/// Z = sum_m integral alpha_m exp(-U(x; m)) dx. Closed form for all-Gaussian
/// mixtures, quadrature otherwise (d <= 2).
double normalization_constant(const MixtureModel& model);

/// Quadrature evaluation of Z regardless of component kind (d <= 2).
double normalization_constant_quadrature(const MixtureModel& model);

/// Reference value of E[phi] under the normalized mixture.
double exact_observable(const MixtureModel& model, Observable observable);

/// 1D reference E[f] by quadrature; model must be one-dimensional.
double exact_expectation_1d(const MixtureModel& model,
                            const std::function<double(double)>& f);

/// Named reference mixtures: "example1", "example2", "example3".
MixtureModel preset(std::string_view name);
std::vector<std::string> preset_names();

/// Dissipativity constants with -grad U(x) . x <= -c1 |x|^2 + c2 on a grid.
struct DissipativityBound {
  double c1;
  double c2;
};

/// Fits (c1, c2) for component m over a grid with |x| <= radius. Returns
/// c1 > 0 when the bound exists on the grid; throws Unsupported for d > 2.
DissipativityBound fit_dissipativity(const MixtureModel& model, std::size_t m,
                                     double radius = 20.0,
                                     std::size_t points_per_axis = 401);

}  // namespace sdews
