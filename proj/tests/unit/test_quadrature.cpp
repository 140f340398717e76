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

#include "sdews/error.hpp"
#include "sdews/quadrature.hpp"

namespace sdews {
namespace {

TEST(Quadrature, GaussianIntegral) {
  QuadratureSpec spec;
  spec.domain = Box{{-12.0}, {12.0}};
  const auto r = integrate([](std::span<const double> x) { return std::exp(-0.5 * x[0] * x[0]); },
                           spec);
  EXPECT_NEAR(r.value, std::sqrt(2.0 * std::numbers::pi), 1e-10);
  EXPECT_LT(r.error_estimate, 1e-10);
}

TEST(Quadrature, ConstantOnUnitInterval) {
  QuadratureSpec spec;
  spec.domain = Box{{0.0}, {1.0}};
  const auto r = integrate([](std::span<const double>) { return 1.0; }, spec);
  EXPECT_NEAR(r.value, 1.0, 1e-15);
}

TEST(Quadrature, SimpsonExactForCubics) {
  const Box box{{-1.0}, {2.0}};
  const double v = simpson([](std::span<const double> x) { return x[0] * x[0] * x[0] - x[0]; },
                           box, 2);
  EXPECT_NEAR(v, (16.0 - 1.0) / 4.0 - (4.0 - 1.0) / 2.0, 1e-14);
  EXPECT_THROW(simpson([](std::span<const double>) { return 0.0; }, box, 3),
               std::invalid_argument);
}

TEST(Quadrature, TwoDimensionalGaussian) {
  QuadratureSpec spec;
  spec.domain = Box{{-10.0, -10.0}, {10.0, 10.0}};
  spec.max_levels = 6;
  const auto r = integrate_with_truncation_check(
      [](std::span<const double> x) {
        return std::exp(-0.5 * (x[0] * x[0] + 4.0 * x[1] * x[1]));
      },
      spec);
  EXPECT_NEAR(r.value, std::numbers::pi, 1e-9);
}

TEST(Quadrature, RefinementChangeBelowTolerance) {
  QuadratureSpec spec;
  spec.domain = Box{{0.0}, {3.0}};
  const auto f = [](std::span<const double> x) { return std::sin(x[0]) * std::exp(x[0]); };
  const auto r = integrate(f, spec);
  const double finer = simpson(f, spec.domain, r.panels * 2);
  EXPECT_LE(std::abs(finer - r.value), 1e-10 * std::abs(r.value));
}

TEST(Quadrature, UnsettledRefinementIsAnOracleFailure) {
  QuadratureSpec spec;
  spec.domain = Box{{0.0}, {1.0}};
  spec.base_panels = 2;
  spec.max_levels = 3;
  spec.rel_tol = 1e-15;
  spec.abs_tol = 0.0;
  EXPECT_THROW(integrate([](std::span<const double> x) { return x[0] < 0.3 ? 0.0 : 1.0; }, spec),
               OracleFailure);
}

TEST(Quadrature, DoubledBoxKeepsCentre) {
  const Box b = Box{{1.0, -2.0}, {3.0, 0.0}}.doubled();
  EXPECT_EQ(b.lo, (std::vector<double>{0.0, -3.0}));
  EXPECT_EQ(b.hi, (std::vector<double>{4.0, 1.0}));
}

}  // namespace
}  // namespace sdews
