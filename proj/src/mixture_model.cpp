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

#include "sdews/mixture_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "sdews/error.hpp"
#include "sdews/quadrature.hpp"

namespace sdews {

namespace {

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(),
                     [](double v) { return std::isfinite(v); });
}

std::size_t kind_dimension(const PotentialKind& kind) {
  if (const auto* g = std::get_if<GaussianPotential>(&kind)) {
    return g->mean.size();
  }
  if (std::holds_alternative<QuarticPotential>(kind)) return 1;
  return 0;
}

}  // namespace

PotentialComponent::PotentialComponent(PotentialKind kind, double alpha,
                                       std::vector<double> init_point)
    : kind_(std::move(kind)), alpha_(alpha) {
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) {
    throw ConfigError("component weight alpha must be positive and finite");
  }
  log_alpha_ = std::log(alpha_);

  if (std::holds_alternative<CustomGridPotential>(kind_)) {
    throw Unsupported("custom grid potentials are reserved and not implemented");
  }
  dimension_ = kind_dimension(kind_);
  if (dimension_ == 0) {
    throw ConfigError("component dimension must be positive");
  }

  if (const auto* q = std::get_if<QuarticPotential>(&kind_)) {
    if (!(q->beta > 0.0) || !std::isfinite(q->beta)) {
      throw ConfigError("quartic potential requires beta > 0");
    }
    quartic_ = true;
    beta_ = q->beta;
  }

  if (const auto* g = std::get_if<GaussianPotential>(&kind_)) {
    const std::size_t d = dimension_;
    if (g->covariance.size() != d * d) {
      throw ConfigError("covariance must be a " + std::to_string(d) + "x" +
                        std::to_string(d) + " matrix");
    }
    if (!all_finite(g->mean) || !all_finite(g->covariance)) {
      throw ConfigError("Gaussian parameters must be finite");
    }
    Eigen::MatrixXd cov(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) cov(i, j) = g->covariance[i * d + j];
    }
    const double scale = cov.cwiseAbs().maxCoeff();
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw ConfigError("covariance must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
      throw ConfigError("covariance must be positive definite");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::MatrixXd precision =
        llt.solve(Eigen::MatrixXd::Identity(d, d));
    precision_.resize(d * d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        precision_[i * d + j] = 0.5 * (precision(i, j) + precision(j, i));
      }
    }
    mean_ = g->mean;
    log_det_cov_ = eig.eigenvalues().array().log().sum();
    if (!std::isfinite(log_det_cov_) || !all_finite(precision_)) {
      throw ConfigError("covariance is numerically singular");
    }
  }

  if (init_point.empty()) {
    if (const auto* g = std::get_if<GaussianPotential>(&kind_)) {
      init_point_ = g->mean;
    } else {
      // The double well is symmetric about the origin.
      init_point_.assign(dimension_, 0.0);
    }
  } else {
    if (init_point.size() != dimension_ || !all_finite(init_point)) {
      throw ConfigError("init_point must be a finite vector of the component dimension");
    }
    init_point_ = std::move(init_point);
  }
}

PotentialComponent PotentialComponent::Gaussian(std::vector<double> mean,
                                                std::vector<double> covariance,
                                                double alpha) {
  return PotentialComponent(
      GaussianPotential{std::move(mean), std::move(covariance)}, alpha);
}

PotentialComponent PotentialComponent::Quartic(double beta, double alpha) {
  return PotentialComponent(QuarticPotential{beta}, alpha);
}

double PotentialComponent::potential(std::span<const double> x) const {
  if (const auto* g = std::get_if<GaussianPotential>(&kind_)) {
    const std::size_t d = dimension_;
    if (d == 1) {
      const double r = x[0] - g->mean[0];
      return 0.5 * precision_[0] * r * r;
    }
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double ri = x[i] - g->mean[i];
      double row = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        row += precision_[i * d + j] * (x[j] - g->mean[j]);
      }
      quad += ri * row;
    }
    return 0.5 * quad;
  }
  const double beta = std::get<QuarticPotential>(kind_).beta;
  const double x2 = x[0] * x[0];
  return beta * (x2 * x2 - 4.0 * x2);
}

double PotentialComponent::potential_infimum() const {
  if (const auto* q = std::get_if<QuarticPotential>(&kind_)) {
    return -4.0 * q->beta;  // attained at x^2 = 2
  }
  return 0.0;
}

double PotentialComponent::density_supremum() const {
  return alpha_ * std::exp(-potential_infimum());
}

MixtureModel::MixtureModel(std::vector<PotentialComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) {
    throw ConfigError("a mixture needs at least one component");
  }
  dimension_ = components_.front().dimension();
  for (const auto& c : components_) {
    if (c.dimension() != dimension_) {
      throw ConfigError("all mixture components must share one dimension");
    }
  }
}

const PotentialComponent& MixtureModel::component(std::size_t m) const {
  if (m >= components_.size()) {
    throw std::out_of_range("regime index " + std::to_string(m) +
                            " out of range");
  }
  return components_[m];
}

bool MixtureModel::all_gaussian() const {
  return std::all_of(components_.begin(), components_.end(),
                     [](const auto& c) { return c.is_gaussian(); });
}

void MixtureModel::check_point(std::span<const double> x, std::size_t m) const {
  if (m >= components_.size()) {
    throw std::out_of_range("regime index " + std::to_string(m) +
                            " out of range");
  }
  if (x.size() != dimension_) {
    throw std::invalid_argument("point dimension does not match the mixture");
  }
  if (!all_finite(x)) throw std::domain_error("point has non-finite entries");
}

double MixtureModel::potential(std::span<const double> x, std::size_t m) const {
  check_point(x, m);
  return components_[m].potential(x);
}

void MixtureModel::grad_potential(std::span<const double> x, std::size_t m,
                                  std::span<double> out) const {
  check_point(x, m);
  components_[m].gradient(x, out);
}

double MixtureModel::weighted_log_density(std::span<const double> x,
                                          std::size_t m) const {
  check_point(x, m);
  return components_[m].log_alpha() - components_[m].potential(x);
}

double MixtureModel::weighted_density(std::span<const double> x,
                                      std::size_t m) const {
  const double log_rho = weighted_log_density(x, m);
  return log_rho < kLogUnderflow ? 0.0 : std::exp(log_rho);
}

double MixtureModel::mixture_density(std::span<const double> x) const {
  double sum = 0.0;
  for (std::size_t m = 0; m < components_.size(); ++m) {
    sum += weighted_density(x, m);
  }
  return sum;
}

namespace {

QuadratureSpec reference_quadrature(std::size_t d) {
  QuadratureSpec spec;
  if (d == 1) {
    spec.domain = Box{{-12.0}, {12.0}};
    spec.base_panels = 256;
  } else if (d == 2) {
    spec.domain = Box{{-10.0, -10.0}, {10.0, 10.0}};
    spec.base_panels = 64;
    spec.max_levels = 6;
  } else {
    throw Unsupported("quadrature references are limited to d <= 2");
  }
  spec.rel_tol = 1e-10;
  return spec;
}

double gaussian_mass(const PotentialComponent& c) {
  const double d = static_cast<double>(c.dimension());
  return c.alpha() * std::pow(2.0 * std::numbers::pi, 0.5 * d) *
         std::exp(0.5 * c.log_det_covariance());
}

// x^2 and |x|^2 coincide once the dimension has been checked.
double squared_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

void check_observable(const MixtureModel& model, Observable observable) {
  if (observable == Observable::kSecondMoment && model.dimension() != 1) {
    throw Unsupported("the second-moment observable x^2 requires d = 1");
  }
}

}  // namespace

double normalization_constant_quadrature(const MixtureModel& model) {
  const QuadratureSpec spec = reference_quadrature(model.dimension());
  return integrate_with_truncation_check(
             [&](std::span<const double> x) { return model.mixture_density(x); },
             spec)
      .value;
}

double normalization_constant(const MixtureModel& model) {
  if (model.all_gaussian()) {
    double z = 0.0;
    for (const auto& c : model.components()) z += gaussian_mass(c);
    return z;
  }
  if (model.dimension() > 2) {
    throw Unsupported(
        "normalization constant for non-Gaussian mixtures requires d <= 2");
  }
  return normalization_constant_quadrature(model);
}

double exact_observable(const MixtureModel& model, Observable observable) {
  check_observable(model, observable);
  if (model.all_gaussian()) {
    double z = 0.0;
    double acc = 0.0;
    const std::size_t d = model.dimension();
    for (const auto& c : model.components()) {
      const double w = gaussian_mass(c);
      const auto& g = c.gaussian();
      double trace = 0.0;
      double norm2 = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        trace += g.covariance[i * d + i];
        norm2 += g.mean[i] * g.mean[i];
      }
      z += w;
      acc += w * (trace + norm2);
    }
    return acc / z;
  }
  if (model.dimension() > 2) {
    throw Unsupported("quadrature references are limited to d <= 2");
  }
  const QuadratureSpec spec = reference_quadrature(model.dimension());
  const double moment =
      integrate_with_truncation_check(
          [&](std::span<const double> x) {
            return squared_norm(x) * model.mixture_density(x);
          },
          spec)
          .value;
  return moment / normalization_constant_quadrature(model);
}

double exact_expectation_1d(const MixtureModel& model,
                            const std::function<double(double)>& f) {
  if (model.dimension() != 1) {
    throw Unsupported("exact_expectation_1d requires a one-dimensional mixture");
  }
  const QuadratureSpec spec = reference_quadrature(1);
  const double num =
      integrate_with_truncation_check(
          [&](std::span<const double> x) {
            return f(x[0]) * model.mixture_density(x);
          },
          spec)
          .value;
  return num / normalization_constant_quadrature(model);
}

MixtureModel preset(std::string_view name) {
  // The 1D presets take sigma as a standard deviation; the 2D preset takes
  // its entries as the covariance matrix itself.
  if (name == "example1") {
    return MixtureModel({
        PotentialComponent::Gaussian({0.0}, {2.0 * 2.0}, 0.5),
        PotentialComponent::Gaussian({3.0}, {0.5 * 0.5}, 0.4),
    });
  }
  if (name == "example2") {
    return MixtureModel({
        PotentialComponent::Gaussian({3.5}, {1.0 * 1.0}, 0.8),
        PotentialComponent::Gaussian({-3.0}, {0.6 * 0.6}, 1.0),
        PotentialComponent::Quartic(0.25, 0.4),
    });
  }
  if (name == "example3") {
    return MixtureModel({
        PotentialComponent::Gaussian({1.0, 1.0}, {2.0, 0.1, 0.1, 0.5}, 0.7),
        PotentialComponent::Gaussian({-2.0, -1.0}, {1.0, -0.1, -0.1, 1.0}, 0.5),
    });
  }
  throw ConfigError("unknown mixture preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
  return {"example1", "example2", "example3"};
}

DissipativityBound fit_dissipativity(const MixtureModel& model, std::size_t m,
                                     double radius,
                                     std::size_t points_per_axis) {
  const std::size_t d = model.dimension();
  if (d > 2) throw Unsupported("dissipativity fit supports d <= 2");
  if (points_per_axis < 3) points_per_axis = 3;

  const double step = 2.0 * radius / static_cast<double>(points_per_axis - 1);
  std::vector<double> x(d);
  std::vector<double> grad(d);

  const auto for_each_point = [&](auto&& visit) {
    const std::size_t ny = d == 2 ? points_per_axis : 1;
    for (std::size_t i = 0; i < points_per_axis; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        x[0] = -radius + static_cast<double>(i) * step;
        if (d == 2) x[1] = -radius + static_cast<double>(j) * step;
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        if (r2 > radius * radius) continue;
        model.grad_potential(x, m, grad);
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += grad[k] * x[k];
        visit(r2, dot);
      }
    }
  };

  // Half the smallest outer-shell ratio grad U . x / |x|^2 as c1, then the
  // smallest c2 that makes the inequality hold on the whole grid.
  double ratio = std::numeric_limits<double>::infinity();
  for_each_point([&](double r2, double dot) {
    if (r2 >= 0.25 * radius * radius) ratio = std::min(ratio, dot / r2);
  });
  const double c1 = 0.5 * ratio;
  double c2 = -std::numeric_limits<double>::infinity();
  for_each_point([&](double r2, double dot) { c2 = std::max(c2, c1 * r2 - dot); });
  return {c1, c2};
}

}  // namespace sdews
