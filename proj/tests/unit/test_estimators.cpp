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

#include <bit>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "sdews/error.hpp"
#include "sdews/estimators.hpp"

namespace sdews {
namespace {

SimulationPlan make_plan(double h, double horizon, std::uint64_t m) {
  SimulationPlan plan;
  plan.h = h;
  plan.steps = steps_for_horizon(horizon, h);
  plan.trajectories = m;
  return plan;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

TEST(Variance, OnePassMatchesTwoPass) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(2, 1000);
  std::uniform_real_distribution<double> offset(-10.0, 10.0);
  std::uniform_real_distribution<double> log_scale(-1.0, 1.0);
  std::normal_distribution<double> noise;
  double worst = 0.0;
  for (int fixture = 0; fixture < 10000; ++fixture) {
    const int n = size(rng);
    const double mu = offset(rng);
    const double scale = std::pow(10.0, log_scale(rng));
    std::vector<double> v(n);
    for (double& x : v) x = mu + scale * noise(rng);
    long double mean = 0.0L;
    for (double x : v) mean += x;
    mean /= n;
    long double ss = 0.0L;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double two_pass = static_cast<double>(ss / n);
    worst = std::max(worst, std::abs(one_pass_variance(v) - two_pass) / two_pass);
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(Variance, AccumulatorMergeAndClamp) {
  MomentAccumulator a;
  MomentAccumulator b;
  for (int i = 0; i < 10; ++i) a.add(i);
  for (int i = 10; i < 20; ++i) b.add(i);
  a.merge(b);
  EXPECT_EQ(a.count, 20u);
  EXPECT_DOUBLE_EQ(a.mean(), 9.5);
  EXPECT_NEAR(a.variance(), (400.0 - 1.0) / 12.0, 1e-12);
  MomentAccumulator c;
  for (int i = 0; i < 5; ++i) c.add(0.1);
  EXPECT_GE(c.variance(), 0.0);
}

TEST(CompensatedSum, RecoversSmallTerms) {
  CompensatedSum s;
  s.add(1.0);
  for (int i = 0; i < 1000000; ++i) s.add(1e-16);
  s.add(-1.0);
  EXPECT_NEAR(s.value(), 1e-10, 1e-18);
}

TEST(Histogram, BinningAndRange) {
  Histogram hist(HistogramSpec{{-1.0}, {1.0}, {4}});
  const double inside[1] = {-0.5};
  const double edge[1] = {1.0};
  const double low[1] = {-1.0};
  EXPECT_EQ(hist.bin_of(inside), std::optional<std::size_t>(1));
  EXPECT_EQ(hist.bin_of(low), std::optional<std::size_t>(0));
  EXPECT_FALSE(hist.bin_of(edge).has_value());
  hist.add(inside);
  hist.add(edge);
  EXPECT_EQ(hist.total(), 2u);
  EXPECT_EQ(hist.out_of_range(), 1u);

  Histogram grid(HistogramSpec{{0.0, 0.0}, {2.0, 3.0}, {2, 3}});
  const double p[2] = {1.5, 0.5};
  // x-major: index = ix * ny + iy.
  EXPECT_EQ(grid.bin_of(p), std::optional<std::size_t>(3));
  Histogram other(grid.spec());
  other.add(p);
  grid.add(p);
  grid.merge(other);
  EXPECT_EQ(grid.counts()[3], 2u);
  EXPECT_THROW((HistogramSpec{{1.0}, {0.0}, {4}}.validate()), ConfigError);
  EXPECT_THROW((HistogramSpec{{0.0}, {1.0}, {0}}.validate()), ConfigError);
}

TEST(Histogram, DefaultSpecs) {
  const HistogramSpec one = HistogramSpec::default_for(1);
  EXPECT_EQ(one.bins, std::vector<std::size_t>{480});
  EXPECT_EQ(one.lo[0], -12.0);
  const HistogramSpec two = HistogramSpec::default_for(2);
  EXPECT_EQ(two.total_bins(), 160u * 160u);
  EXPECT_EQ(two.hi[1], 8.0);
}

TEST(Tvd, ExactBinMassesMatchErf) {
  const MixtureModel model = preset("example1");
  const HistogramSpec spec{{-12.0}, {12.0}, {48}};
  const auto masses = exact_bin_masses(model, spec);
  double total = 0.0;
  for (std::size_t b = 0; b < masses.size(); ++b) {
    const double lo = -12.0 + 0.5 * b;
    const double hi = lo + 0.5;
    const double p = (1.0 * (normal_cdf(hi / 2.0) - normal_cdf(lo / 2.0)) +
                      0.2 * (normal_cdf((hi - 3.0) / 0.5) - normal_cdf((lo - 3.0) / 0.5))) /
                     1.2;
    EXPECT_NEAR(masses[b], p, 1e-9) << b;
    total += masses[b];
  }
  EXPECT_NEAR(total, 1.0, 1e-8);

  const MixtureModel ex3 = preset("example3");
  double total2 = 0.0;
  for (double m : exact_bin_masses(ex3, HistogramSpec::default_for(2))) total2 += m;
  EXPECT_NEAR(total2, 1.0, 1e-6);
}

TEST(Tvd, MatchingMassesGiveZero) {
  Histogram hist(HistogramSpec{{-2.0}, {2.0}, {4}});
  for (double x : {-1.5, -0.5, -0.5, 0.5, 1.5, 1.5, 1.5, 0.2}) {
    const double p[1] = {x};
    hist.add(p);
  }
  std::vector<double> masses;
  for (auto c : hist.counts()) masses.push_back(c / 8.0);
  const TvdResult r = tvd_from_masses(hist, masses);
  EXPECT_NEAR(r.tvd, 0.0, 1e-15);
  EXPECT_TRUE(r.warnings.empty());

  std::vector<double> shifted = {0.0, 0.0, 0.0, 0.9};
  const TvdResult s = tvd_from_masses(hist, shifted);
  EXPECT_GE(s.tvd, 0.0);
  EXPECT_LE(s.tvd, 1.0);
  EXPECT_FALSE(s.warnings.empty());
}

TEST(Tvd, DisjointSupportGivesOne) {
  Histogram hist(HistogramSpec{{0.0}, {2.0}, {2}});
  const double p[1] = {0.5};
  hist.add(p);
  const std::vector<double> masses = {0.0, 1.0};
  EXPECT_NEAR(tvd_from_masses(hist, masses).tvd, 1.0, 1e-15);
}

TEST(Tvd, OutOfRangeSamplesCount) {
  Histogram hist(HistogramSpec{{0.0}, {1.0}, {1}});
  const double in[1] = {0.5};
  const double out[1] = {5.0};
  hist.add(in);
  hist.add(out);
  const std::vector<double> masses = {1.0};
  EXPECT_NEAR(tvd_from_masses(hist, masses).tvd, 0.5, 1e-15);
}

TEST(Estimators, WorkerCountDoesNotChangeResults) {
  const SdewsSystem system = SdewsSystem::ergodic(preset("example2"), RatePolicy::density());
  SimulationPlan plan = make_plan(0.4, 20.0, 5000);
  plan.rejection_radius = 100.0;
  plan.workers = 1;
  const auto spec = HistogramSpec::default_for(1);
  const EstimatorReport ref =
      ensemble_estimate(system, plan, ObservableSpec::second_moment(), spec);
  for (std::size_t w : {2u, 3u, 8u}) {
    plan.workers = w;
    const EstimatorReport r =
        ensemble_estimate(system, plan, ObservableSpec::second_moment(), spec);
    EXPECT_EQ(std::bit_cast<std::uint64_t>(r.estimate),
              std::bit_cast<std::uint64_t>(ref.estimate));
    EXPECT_EQ(std::bit_cast<std::uint64_t>(*r.sample_variance),
              std::bit_cast<std::uint64_t>(*ref.sample_variance));
    EXPECT_EQ(r.histogram->counts(), ref.histogram->counts());
    EXPECT_EQ(std::bit_cast<std::uint64_t>(*r.tvd), std::bit_cast<std::uint64_t>(*ref.tvd));
    EXPECT_EQ(r.rejected_count, ref.rejected_count);
  }
}

TEST(Estimators, TimeAverageConsistentWithEnsemble) {
  const SdewsSystem system = SdewsSystem::ergodic(preset("example1"), RatePolicy::density());
  const SimulationPlan ensemble = make_plan(0.2, 100.0, 40000);
  SimulationPlan time = make_plan(0.2, 100.0, 20);
  time.averaging_steps = 500 * 40000 / 20;
  const EstimatorReport e =
      ensemble_estimate(system, ensemble, ObservableSpec::second_moment());
  const EstimatorReport t =
      time_average_estimate(system, time, ObservableSpec::second_moment());
  EXPECT_EQ(t.samples, 20u);
  // Half-widths are two standard errors.
  const double sigma = 0.5 * std::hypot(*e.mc_half_width, *t.mc_half_width);
  EXPECT_LE(std::abs(e.estimate - t.estimate), 3.0 * sigma);
}

TEST(Estimators, ObservableValidation) {
  EXPECT_THROW(ObservableSpec::second_moment().validate(2), ConfigError);
  EXPECT_NO_THROW(ObservableSpec::squared_norm().validate(2));
  const double x[2] = {1.0, 2.0};
  EXPECT_EQ(ObservableSpec::squared_norm()(x, 0), 5.0);
  const auto c = ObservableSpec::custom([](std::span<const double> p, std::size_t m) {
    return p[0] + m;
  });
  EXPECT_EQ(c(x, 2), 3.0);
}

TEST(Estimators, RegimeOccupationCountsEveryTrajectory) {
  const SdewsSystem system = SdewsSystem::ergodic(preset("example2"), RatePolicy::density());
  const SimulationPlan plan = make_plan(0.25, 5.0, 3000);
  const RegimeOccupation occ = regime_occupation(system, plan);
  std::uint64_t total = 0;
  for (auto c : occ.counts) total += c;
  EXPECT_EQ(total, 3000u);
}

TEST(Fit, LogLogRecoversPowerLaw) {
  const std::vector<double> h = {0.4, 0.2, 0.1, 0.05};
  std::vector<double> y;
  for (double v : h) y.push_back(3.0 * v * v);
  const std::vector<double> w = {1.0, 2.0, 3.0, 4.0};
  const auto fit = fit_loglog(h, y, w);
  ASSERT_TRUE(fit.has_value());
  EXPECT_NEAR(fit->slope, 2.0, 1e-12);
  EXPECT_NEAR(fit->intercept, std::log(3.0), 1e-12);
  EXPECT_EQ(fit->points, 4u);
  const std::vector<double> one = {0.1, 0.1};
  EXPECT_FALSE(fit_loglog(one, one, one).has_value());
}

TEST(Fit, StudyExcludesNoiseDominatedRows) {
  ConvergenceStudy study;
  for (double h : {0.4, 0.2, 0.1, 0.05}) {
    ConvergenceRow r;
    r.h = h;
    r.error = 0.1 * h;
    r.mc_half_width = 0.001;
    r.in_fit = std::abs(r.error) >= 2.0 * r.mc_half_width;
    r.tvd = 0.05 * h;
    study.rows.push_back(r);
  }
  study.rows.back().mc_half_width = 0.01;
  study.rows.back().in_fit = false;
  study.rows.back().error = 0.5;
  fit_study(study);
  ASSERT_TRUE(study.bias_fit && study.tvd_fit);
  EXPECT_EQ(study.bias_fit->points, 3u);
  EXPECT_NEAR(study.bias_fit->slope, 1.0, 1e-12);
  EXPECT_NEAR(study.tvd_fit->slope, 1.0, 1e-12);
}

TEST(Fit, ConvergenceStudyRowSeeds) {
  const SdewsSystem system = SdewsSystem::ergodic(preset("example1"), RatePolicy::density());
  SimulationPlan plan = make_plan(0.4, 4.0, 2000);
  plan.seed = 77;
  const std::vector<double> hs = {0.4, 0.2};
  std::size_t delivered = 0;
  const ConvergenceStudy study = convergence_study(
      system, plan, 4.0, hs, ObservableSpec::second_moment(), 4.875,
      HistogramSpec{{-12.0}, {12.0}, {120}},
      [&](const ConvergenceRow&) { ++delivered; });
  EXPECT_EQ(delivered, 2u);
  ASSERT_EQ(study.rows.size(), 2u);
  EXPECT_EQ(study.rows[1].seed, mix_seed(77, std::bit_cast<std::uint64_t>(0.2)));
  EXPECT_TRUE(study.rows[0].tvd.has_value());
  const std::string csv = convergence_csv(study);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "h,M,T,phi_hat,error,mc_half_width,tvd");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Format, ShortestRoundTrip) {
  for (double v : {0.1, 4.875, 1e-300, 6.983547404353286, -0.0375}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.4), "0.4");
}

}  // namespace
}  // namespace sdews
