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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sdews/error.hpp"
#include "sdews/mixture_model.hpp"

namespace sdews {
namespace {

// Trapezoid rule on a wide uniform grid; spectrally accurate for smooth,
// rapidly decaying integrands and shares no code with the library quadrature.
double trapezoid(const std::function<double(double)>& f, double lo, double hi,
                 int n) {
  const long double step = (static_cast<long double>(hi) - lo) / n;
  long double sum = 0.5L * (f(lo) + f(hi));
  for (int i = 1; i < n; ++i) sum += f(static_cast<double>(lo + i * step));
  return static_cast<double>(sum * step);
}

std::vector<double> random_point(std::mt19937_64& rng, std::size_t d,
                                 double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<double> x(d);
  do {
    double r2 = 0.0;
    for (double& v : x) {
      v = u(rng);
      r2 += v * v;
    }
    if (r2 <= radius * radius) break;
  } while (true);
  return x;
}

TEST(MixtureModel, PresetsMatchTabulatedParameters) {
  const MixtureModel ex1 = preset("example1");
  ASSERT_EQ(ex1.regimes(), 2u);
  EXPECT_EQ(ex1.component(0).gaussian().mean[0], 0.0);
  EXPECT_EQ(ex1.component(0).gaussian().covariance[0], 4.0);
  EXPECT_EQ(ex1.component(1).gaussian().mean[0], 3.0);
  EXPECT_EQ(ex1.component(1).gaussian().covariance[0], 0.25);
  EXPECT_EQ(ex1.component(0).alpha(), 0.5);
  EXPECT_EQ(ex1.component(1).alpha(), 0.4);

  const MixtureModel ex2 = preset("example2");
  ASSERT_EQ(ex2.regimes(), 3u);
  EXPECT_EQ(ex2.component(2).alpha(), 0.4);
  EXPECT_FALSE(ex2.all_gaussian());
  EXPECT_EQ(ex2.component(2).init_point(), std::vector<double>{0.0});

  const MixtureModel ex3 = preset("example3");
  EXPECT_EQ(ex3.dimension(), 2u);
  EXPECT_EQ(ex3.component(1).gaussian().covariance,
            (std::vector<double>{1.0, -0.1, -0.1, 1.0}));

  EXPECT_THROW(preset("example4"), ConfigError);
}

TEST(MixtureModel, ExactObservablesMatchClosedForms) {
  // E x^2 = sum_m w_m (sigma_m^2 + mean_m^2), w_m proportional to alpha_m sigma_m.
  EXPECT_NEAR(exact_observable(preset("example1"), Observable::kSecondMoment),
              4.875, 1e-9);
  EXPECT_NEAR(exact_observable(preset("example3"), Observable::kSquaredNorm),
              (0.7 * 4.5 + 0.5 * 7.0) / 1.2, 1e-9);
  EXPECT_NEAR(normalization_constant(preset("example1")),
              std::sqrt(2.0 * std::numbers::pi) * 1.2, 1e-12);
  EXPECT_NEAR(normalization_constant(preset("example3")),
              2.0 * std::numbers::pi * std::sqrt(0.99) * 1.2, 1e-12);
}

TEST(MixtureModel, Example2AgreesWithIndependentTrapezoid) {
  const MixtureModel model = preset("example2");
  const auto rho = [&](double x) {
    const double p[1] = {x};
    return model.mixture_density(p);
  };
  const double z = trapezoid(rho, -14.0, 14.0, 200000);
  const double m2 =
      trapezoid([&](double x) { return x * x * rho(x); }, -14.0, 14.0, 200000);
  EXPECT_NEAR(normalization_constant(model), z, 1e-9 * z);
  EXPECT_NEAR(exact_observable(model, Observable::kSecondMoment), m2 / z, 1e-8);
  EXPECT_NEAR(m2 / z, 6.98355, 5e-6);
}

TEST(MixtureModel, ClosedFormAgreesWithQuadrature) {
  for (const char* name : {"example1", "example3"}) {
    const MixtureModel model = preset(name);
    const double closed = normalization_constant(model);
    EXPECT_NEAR(normalization_constant_quadrature(model), closed, 1e-7 * closed)
        << name;
  }
}

TEST(MixtureModel, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(7);
  constexpr double kStep = 1e-5;
  for (const auto& name : preset_names()) {
    const MixtureModel model = preset(name);
    const std::size_t d = model.dimension();
    std::vector<double> grad(d);
    for (std::size_t m = 0; m < model.regimes(); ++m) {
      for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x = random_point(rng, d, 5.0);
        model.grad_potential(x, m, grad);
        double norm = 0.0;
        for (double g : grad) norm += g * g;
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < d; ++i) {
          std::vector<double> xp = x;
          std::vector<double> xm = x;
          xp[i] += kStep;
          xm[i] -= kStep;
          const double fd =
              (model.potential(xp, m) - model.potential(xm, m)) / (2.0 * kStep);
          EXPECT_NEAR(fd, grad[i], 1e-6 + 1e-6 * norm)
              << name << " m=" << m << " axis=" << i;
        }
      }
    }
  }
}

TEST(MixtureModel, LogDensityRatioIdentity) {
  std::mt19937_64 rng(11);
  for (const auto& name : preset_names()) {
    const MixtureModel model = preset(name);
    for (int trial = 0; trial < 200; ++trial) {
      const std::vector<double> x = random_point(rng, model.dimension(), 8.0);
      for (std::size_t m = 0; m < model.regimes(); ++m) {
        for (std::size_t j = 0; j < model.regimes(); ++j) {
          const double rm = model.weighted_density(x, m);
          const double rj = model.weighted_density(x, j);
          if (rm <= 1e-300 || rj <= 1e-300) continue;
          const double via_log = std::exp(model.weighted_log_density(x, m) -
                                           model.weighted_log_density(x, j));
          EXPECT_NEAR(via_log, rm / rj, 1e-12 * (rm / rj));
        }
      }
    }
  }
}

TEST(MixtureModel, DensityUnderflowKeepsFiniteLog) {
  const MixtureModel model = preset("example1");
  const double x[1] = {200.0};
  EXPECT_EQ(model.weighted_density(x, 1), 0.0);
  EXPECT_TRUE(std::isfinite(model.weighted_log_density(x, 1)));
  EXPECT_LT(model.weighted_log_density(x, 1), kLogUnderflow);
}

TEST(MixtureModel, DissipativityHoldsOnGrid) {
  for (const auto& name : preset_names()) {
    const MixtureModel model = preset(name);
    const std::size_t d = model.dimension();
    const std::size_t points = d == 1 ? 401 : 81;
    for (std::size_t m = 0; m < model.regimes(); ++m) {
      const DissipativityBound b = fit_dissipativity(model, m, 20.0, points);
      EXPECT_GT(b.c1, 0.0) << name << " m=" << m;
      const double step = 40.0 / static_cast<double>(points - 1);
      std::vector<double> x(d);
      std::vector<double> g(d);
      for (std::size_t i = 0; i < points; ++i) {
        for (std::size_t j = 0; j < (d == 2 ? points : 1); ++j) {
          x[0] = -20.0 + static_cast<double>(i) * step;
          if (d == 2) x[1] = -20.0 + static_cast<double>(j) * step;
          double r2 = 0.0;
          double dot = 0.0;
          model.grad_potential(x, m, g);
          for (std::size_t k = 0; k < d; ++k) {
            r2 += x[k] * x[k];
            dot += g[k] * x[k];
          }
          if (r2 > 400.0) continue;
          EXPECT_LE(-dot, -b.c1 * r2 + b.c2 + 1e-9);
        }
      }
    }
  }
}

TEST(MixtureModel, RejectsInvalidComponents) {
  EXPECT_THROW(PotentialComponent::Gaussian({0.0}, {-1.0}, 1.0), ConfigError);
  EXPECT_THROW(PotentialComponent::Gaussian({0.0}, {1.0}, 0.0), ConfigError);
  EXPECT_THROW(PotentialComponent::Gaussian({0.0, 0.0}, {1.0, 2.0, 2.0, 1.0}, 1.0),
               ConfigError);
  EXPECT_THROW(PotentialComponent::Quartic(-1.0, 1.0), ConfigError);
  EXPECT_THROW(MixtureModel({PotentialComponent::Gaussian({0.0}, {1.0}, 1.0),
                             PotentialComponent::Gaussian({0.0, 0.0},
                                                          {1.0, 0.0, 0.0, 1.0}, 1.0)}),
               ConfigError);
  EXPECT_THROW(MixtureModel({}), ConfigError);
}

}  // namespace
}  // namespace sdews
