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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sdews/error.hpp"
#include "sdews/mixture_model.hpp"
#include "sdews/switching.hpp"

namespace sdews {
namespace {

std::vector<RatePolicy> density_policies(const MixtureModel& model) {
  std::vector<double> betas;
  for (std::size_t m = 0; m < model.regimes(); ++m) betas.push_back(0.5 + 0.75 * m);
  return {RatePolicy::density(), RatePolicy::density_scaled(betas)};
}

std::vector<double> uniform_point(std::mt19937_64& rng, std::size_t d, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  std::vector<double> x(d);
  for (double& v : x) v = u(rng);
  return x;
}

TEST(Skorokhod, TwoStateLayout) {
  const std::vector<double> q = {0.0, 0.3, 0.7, 0.0};
  const SkorokhodTable table = skorokhod_intervals(RateMatrix::from_off_diagonal(2, q));
  EXPECT_EQ(table.interval(0, 1).lo, 0.0);
  EXPECT_EQ(table.interval(0, 1).hi, 0.3);
  EXPECT_TRUE(table.interval(0, 0).empty());
  EXPECT_EQ(table.interval(1, 0).lo, 0.3);
  EXPECT_NEAR(table.interval(1, 0).hi - table.interval(1, 0).lo, 0.7, 1e-15);
  EXPECT_EQ(table.jump(0, 0.1), 1);
  EXPECT_EQ(table.jump(1, 0.5), -1);
  EXPECT_EQ(table.jump(0, 0.5), 0);
  EXPECT_DOUBLE_EQ(table.ell(), 0.7);
  EXPECT_DOUBLE_EQ(table.bound(), 2.0 * 0.7);
}

TEST(Skorokhod, ZeroRateGivesEmptyInterval) {
  const std::vector<double> q = {0.0, 0.0, 0.7, 0.0};
  const SkorokhodTable table = skorokhod_intervals(RateMatrix::from_off_diagonal(2, q));
  EXPECT_TRUE(table.interval(0, 1).empty());
  for (double z = 0.0; z < 0.7; z += 0.01) EXPECT_EQ(table.jump(0, z), 0);
}

TEST(Skorokhod, RowLengthsSumToTotalRate) {
  std::mt19937_64 rng(3);
  for (const auto& name : preset_names()) {
    const MixtureModel model = preset(name);
    for (int trial = 0; trial < 100; ++trial) {
      const auto x = uniform_point(rng, model.dimension(), 6.0);
      const RateMatrix rates = evaluate_rates(RatePolicy::density(), model, x);
      const SkorokhodTable table = skorokhod_intervals(rates);
      for (std::size_t i = 0; i < rates.regimes(); ++i) {
        double len = 0.0;
        for (std::size_t j = 0; j < rates.regimes(); ++j) {
          len += table.interval(i, j).hi - table.interval(i, j).lo;
        }
        EXPECT_NEAR(len, rates.total_rate(i), 1e-14);
      }
    }
  }
}

TEST(RateMatrix, RowSumIdentity) {
  std::mt19937_64 rng(5);
  for (const auto& name : preset_names()) {
    const MixtureModel model = preset(name);
    for (const RatePolicy& policy : density_policies(model)) {
      for (int trial = 0; trial < 1000; ++trial) {
        const auto x = uniform_point(rng, model.dimension(), 8.0);
        const RateMatrix rates = evaluate_rates(policy, model, x);
        for (std::size_t i = 0; i < rates.regimes(); ++i) {
          double sum = 0.0;
          for (std::size_t j = 0; j < rates.regimes(); ++j) {
            if (j != i) {
              EXPECT_GE(rates.q(i, j), 0.0);
              sum += rates.q(i, j);
            }
          }
          const double qi = rates.total_rate(i);
          EXPECT_LE(std::abs(sum - qi), 1e-14 * std::max(1.0, qi));
        }
      }
    }
  }
}

TEST(RateMatrix, DetailedBalance) {
  std::mt19937_64 rng(9);
  for (const auto& name : preset_names()) {
    const MixtureModel model = preset(name);
    for (const RatePolicy& policy : density_policies(model)) {
      for (int trial = 0; trial < 1000; ++trial) {
        const auto x = uniform_point(rng, model.dimension(), 6.0);
        EXPECT_LE(detailed_balance_residual(policy, model, x).residual, 1e-12)
            << name;
      }
    }
  }
}

TEST(RateMatrix, ConstantRatesViolateDetailedBalance) {
  const MixtureModel model = preset("example1");
  const double x[1] = {0.0};
  const auto r = detailed_balance_residual(
      RatePolicy::constant(2, {0.0, 1.0, 1.0, 0.0}), model, x);
  EXPECT_GT(r.residual, 1.0);
}

TEST(RateMatrix, SampledSupremumWithinAnalyticBound) {
  for (const auto& name : preset_names()) {
    const MixtureModel model = preset(name);
    const RatePolicy policy = RatePolicy::density();
    const double bound = *policy.rate_bound(&model);
    double max_alpha = 0.0;
    for (const auto& c : model.components()) max_alpha = std::max(max_alpha, c.alpha());
    if (model.all_gaussian()) {
      EXPECT_LE(bound, (model.regimes() - 1) * max_alpha + 1e-12);
    }
    const std::size_t d = model.dimension();
    const int n = d == 1 ? 4001 : 201;
    std::vector<double> x(d);
    double sup = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < (d == 2 ? n : 1); ++j) {
        x[0] = -20.0 + 40.0 * i / (n - 1);
        if (d == 2) x[1] = -20.0 + 40.0 * j / (n - 1);
        if (x[0] * x[0] + (d == 2 ? x[1] * x[1] : 0.0) > 400.0) continue;
        const RateMatrix rates = evaluate_rates(policy, model, x);
        for (std::size_t m = 0; m < model.regimes(); ++m) {
          sup = std::max(sup, rates.total_rate(m));
        }
      }
    }
    EXPECT_LE(sup, bound + 1e-12) << name;
  }
}

TEST(RateMatrix, QuarticBoundUsesPotentialInfimum) {
  // The double well reaches alpha e^{4 beta} at x = +-sqrt(2).
  const MixtureModel model = preset("example2");
  EXPECT_NEAR(model.component(2).density_supremum(), 0.4 * std::exp(1.0), 1e-15);
  const double x[1] = {std::sqrt(2.0)};
  EXPECT_NEAR(model.weighted_density(x, 2), 0.4 * std::exp(1.0), 1e-12);
}

TEST(RatePolicy, ValidatesAgainstModel) {
  const MixtureModel model = preset("example1");
  EXPECT_THROW(RatePolicy::density_scaled({1.0}).validate(&model), ConfigError);
  EXPECT_THROW(RatePolicy::density_scaled({1.0, -1.0}), ConfigError);
  EXPECT_THROW(RatePolicy::constant(2, {0.0, -1.0, 1.0, 0.0}), ConfigError);
  EXPECT_THROW(RatePolicy::constant(3, std::vector<double>(9, 1.0)).validate(&model),
               ConfigError);
  EXPECT_THROW(RatePolicy::density().validate(nullptr), ConfigError);
}

TEST(SwitchStep, IntervalsInIncreasingRegimeOrder) {
  const std::vector<double> q = {0.0, 1.0, 2.0, 0.5, 0.0, 0.5, 1.0, 1.0, 0.0};
  const RateMatrix rates = RateMatrix::from_off_diagonal(3, q);
  const double h = 0.1;
  EXPECT_EQ(switch_step(rates, 0, h, 0.0), 1u);
  EXPECT_EQ(switch_step(rates, 0, h, 0.0999), 1u);
  EXPECT_EQ(switch_step(rates, 0, h, 0.1001), 2u);
  EXPECT_EQ(switch_step(rates, 0, h, 0.2999), 2u);
  EXPECT_EQ(switch_step(rates, 0, h, 0.3001), 0u);
  EXPECT_EQ(switch_step(rates, 1, h, 0.04), 0u);
  EXPECT_EQ(switch_step(rates, 1, h, 0.06), 2u);
  EXPECT_EQ(switch_step(rates, 1, h, 0.5), 1u);
}

TEST(SwitchStep, StepSizeGuard) {
  const std::vector<double> q = {0.0, 3.0, 1.0, 0.0};
  const RateMatrix rates = RateMatrix::from_off_diagonal(2, q);
  const double x[1] = {0.25};
  EXPECT_NO_THROW(switch_step(rates, 0, 1.0 / 3.0, 0.5));
  try {
    switch_step(rates, 0, 0.4, 0.5, x);
    FAIL() << "expected StepSizeViolation";
  } catch (const StepSizeViolation& e) {
    EXPECT_EQ(e.regime(), 0u);
    EXPECT_EQ(e.total_rate(), 3.0);
    EXPECT_EQ(e.step(), 0.4);
    EXPECT_EQ(e.x(), std::vector<double>{0.25});
  }
  EXPECT_THROW(switch_step(rates, 2, 0.1, 0.5), std::out_of_range);
}

TEST(SwitchStep, OneStepLawMatchesRates) {
  const MixtureModel model = preset("example2");
  const double x[1] = {0.7};
  const RateMatrix rates = evaluate_rates(RatePolicy::density(), model, x);
  const double h = 0.4;
  const std::size_t mu = 1;
  constexpr int kDraws = 1000000;
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < kDraws; ++i) ++counts[switch_step(rates, mu, h, u(rng))];
  for (std::size_t j = 0; j < 3; ++j) {
    const double p = j == mu ? 1.0 - h * rates.total_rate(mu) : h * rates.q(mu, j);
    const double sigma = std::sqrt(p * (1.0 - p) / kDraws);
    EXPECT_NEAR(counts[j] / static_cast<double>(kDraws), p, 4.0 * sigma) << j;
  }
}

TEST(SwitchStep, AgreesWithScaledSkorokhodTable) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& name : preset_names()) {
    const MixtureModel model = preset(name);
    const RatePolicy policy = RatePolicy::density();
    const double h = 0.9 / *policy.rate_bound(&model);
    for (int trial = 0; trial < 200; ++trial) {
      const auto x = uniform_point(rng, model.dimension(), 6.0);
      const RateMatrix rates = evaluate_rates(policy, model, x);
      const SkorokhodTable table = skorokhod_intervals(rates);
      for (std::size_t i = 0; i < rates.regimes(); ++i) {
        // Cumulative partition of [0, 1) used by switch_step versus the
        // table's row i shifted to zero and scaled by h.
        double cumulative = 0.0;
        for (std::size_t j = 0; j < rates.regimes(); ++j) {
          if (j == i) continue;
          const Interval& g = table.interval(i, j);
          EXPECT_NEAR((g.lo - table.row_offset(i)) * h, cumulative, 1e-15);
          cumulative += rates.q(i, j) * h;
          EXPECT_NEAR((g.hi - table.row_offset(i)) * h, cumulative, 1e-15);
        }
        for (int k = 0; k < 50; ++k) {
          const double v = u(rng);
          const std::size_t next = switch_step(rates, i, h, v);
          const long f = table.jump(i, table.row_offset(i) + v / h);
          EXPECT_EQ(static_cast<long>(next), static_cast<long>(i) + f);
        }
      }
    }
  }
}

}  // namespace
}  // namespace sdews
