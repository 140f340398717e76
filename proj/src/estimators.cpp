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

#include "sdews/estimators.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>

#include "sdews/error.hpp"
#include "sdews/parallel.hpp"
#include "sdews/quadrature.hpp"

namespace sdews {

double MomentAccumulator::variance() const {
  if (count == 0) return 0.0;
  const double n = static_cast<double>(count);
  const double m = sum.value() / n;
  const double d = sum_sq.value() / n - m * m;
  return std::max(d, 0.0);
}

double one_pass_variance(std::span<const double> values) {
  MomentAccumulator acc;
  for (double v : values) acc.add(v);
  return acc.variance();
}

// ---------------------------------------------------------------------------
// Observables

ObservableSpec ObservableSpec::second_moment() {
  ObservableSpec o;
  o.kind_ = Kind::kSecondMoment;
  o.name_ = "second_moment";
  return o;
}

ObservableSpec ObservableSpec::squared_norm() {
  ObservableSpec o;
  o.kind_ = Kind::kSquaredNorm;
  o.name_ = "squared_norm";
  return o;
}

ObservableSpec ObservableSpec::custom(Fn fn, std::string name) {
  if (!fn) throw ConfigError("custom observable needs a function");
  ObservableSpec o;
  o.kind_ = Kind::kCustom;
  o.name_ = std::move(name);
  o.fn_ = std::move(fn);
  return o;
}

ObservableSpec ObservableSpec::from(Observable o) {
  return o == Observable::kSecondMoment ? second_moment() : squared_norm();
}

void ObservableSpec::validate(std::size_t dimension) const {
  if (kind_ == Kind::kSecondMoment && dimension != 1) {
    throw ConfigError("observable second_moment (x^2) requires d = 1");
  }
}

// ---------------------------------------------------------------------------
// Histograms and TVD

std::size_t HistogramSpec::total_bins() const {
  std::size_t n = 1;
  for (auto b : bins) n *= b;
  return n;
}

void HistogramSpec::validate() const {
  const std::size_t d = bins.size();
  if (d < 1 || d > 2 || lo.size() != d || hi.size() != d) {
    throw ConfigError("histogram needs one or two axes with lo, hi and bins");
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (!(lo[i] < hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i])) {
      throw ConfigError("histogram range must satisfy lo < hi");
    }
    if (bins[i] < 1) throw ConfigError("histogram needs at least one bin");
  }
}

HistogramSpec HistogramSpec::default_for(std::size_t dimension) {
  if (dimension == 1) return {{-12.0}, {12.0}, {480}};
  if (dimension == 2) return {{-8.0, -8.0}, {8.0, 8.0}, {160, 160}};
  throw Unsupported("histograms are limited to d <= 2");
}

Histogram::Histogram(HistogramSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  counts_.assign(spec_.total_bins(), 0);
}

std::optional<std::size_t> Histogram::bin_of(std::span<const double> x) const {
  std::size_t flat = 0;
  for (std::size_t a = 0; a < spec_.dimension(); ++a) {
    const double v = x[a];
    if (!(v >= spec_.lo[a]) || !(v < spec_.hi[a])) return std::nullopt;
    auto i = static_cast<std::size_t>((v - spec_.lo[a]) / spec_.width(a));
    i = std::min(i, spec_.bins[a] - 1);
    flat = flat * spec_.bins[a] + i;
  }
  return flat;
}

void Histogram::add(std::span<const double> x) {
  ++total_;
  if (const auto b = bin_of(x)) {
    ++counts_[*b];
  } else {
    ++out_of_range_;
  }
}

void Histogram::merge(const Histogram& other) {
  if (other.counts_.empty()) return;
  if (counts_.empty()) {
    *this = other;
    return;
  }
  if (other.counts_.size() != counts_.size()) {
    throw std::invalid_argument("cannot merge histograms of different shapes");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
  out_of_range_ += other.out_of_range_;
}

namespace {

// Doubles the panel count until two estimates agree.
double refined_bin_mass(const ScalarField& density, const Box& box, std::size_t panels) {
  double coarse = simpson(density, box, panels);
  for (int level = 0; level < 8; ++level) {
    panels *= 2;
    const double fine = simpson(density, box, panels);
    if (std::abs(fine - coarse) <= 1e-13) return fine;
    coarse = fine;
  }
  return coarse;
}

}  // namespace

std::vector<double> exact_bin_masses(const MixtureModel& model,
                                     const HistogramSpec& spec) {
  spec.validate();
  if (spec.dimension() != model.dimension()) {
    throw ConfigError("histogram dimension does not match the mixture");
  }
  const double z = normalization_constant(model);
  const ScalarField density = [&](std::span<const double> x) {
    return model.mixture_density(x);
  };
  std::vector<double> masses(spec.total_bins());
  if (spec.dimension() == 1) {
    const double w = spec.width(0);
    for (std::size_t i = 0; i < spec.bins[0]; ++i) {
      const double lo = spec.lo[0] + static_cast<double>(i) * w;
      masses[i] = refined_bin_mass(density, Box{{lo}, {lo + w}}, 8) / z;
    }
    return masses;
  }
  const double wx = spec.width(0);
  const double wy = spec.width(1);
  for (std::size_t i = 0; i < spec.bins[0]; ++i) {
    const double x0 = spec.lo[0] + static_cast<double>(i) * wx;
    for (std::size_t j = 0; j < spec.bins[1]; ++j) {
      const double y0 = spec.lo[1] + static_cast<double>(j) * wy;
      masses[i * spec.bins[1] + j] =
          refined_bin_mass(density, Box{{x0, y0}, {x0 + wx, y0 + wy}}, 4) / z;
    }
  }
  return masses;
}

TvdResult tvd_from_masses(const Histogram& histogram,
                          std::span<const double> exact_masses) {
  const auto& counts = histogram.counts();
  if (exact_masses.size() != counts.size()) {
    throw std::invalid_argument("exact masses do not match the histogram");
  }
  TvdResult result;
  if (histogram.total() == 0) {
    throw std::invalid_argument("TVD of an empty sample is undefined");
  }
  const double n = static_cast<double>(histogram.total());
  CompensatedSum diff;
  CompensatedSum exact;
  CompensatedSum empirical;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    const double p_hat = static_cast<double>(counts[b]) / n;
    diff.add(std::abs(p_hat - exact_masses[b]));
    exact.add(exact_masses[b]);
    empirical.add(p_hat);
  }
  result.exact_in_range = exact.value();
  result.empirical_in_range = empirical.value();
  const double exact_out = std::max(0.0, 1.0 - result.exact_in_range);
  const double empirical_out = std::max(0.0, 1.0 - result.empirical_in_range);
  result.tvd = std::clamp(0.5 * (diff.value() + exact_out + empirical_out), 0.0, 1.0);
  if (result.exact_in_range < 1.0 - 1e-6) {
    result.warnings.push_back(fmt::format(
        "histogram range covers only {} of the exact probability mass",
        result.exact_in_range));
  }
  return result;
}

TvdResult tvd_estimate(const Histogram& histogram, const MixtureModel& model) {
  const auto masses = exact_bin_masses(model, histogram.spec());
  return tvd_from_masses(histogram, masses);
}

TvdResult tvd_estimate(std::span<const std::vector<double>> samples,
                       const MixtureModel& model, const HistogramSpec& spec) {
  Histogram histogram(spec);
  for (const auto& s : samples) histogram.add(s);
  return tvd_estimate(histogram, model);
}

// ---------------------------------------------------------------------------
// Estimators

nlohmann::json plan_to_json(const SimulationPlan& plan) {
  nlohmann::json j;
  j["h"] = plan.h;
  j["steps"] = plan.steps;
  j["T"] = plan.horizon();
  j["M"] = plan.trajectories;
  if (plan.averaging_steps > 0) j["L"] = plan.averaging_steps;
  j["noise"] = plan.noise == NoiseKind::kGaussian ? "gaussian" : "rademacher";
  j["ordering"] = plan.ordering == StepOrdering::kSwitchFirst ? "switch_first"
                                                              : "simultaneous";
  if (plan.rejection_radius) j["rejection_radius"] = *plan.rejection_radius;
  j["seed"] = plan.seed;
  if (const auto* fp = std::get_if<FixedPoint>(&plan.initial)) {
    j["initial"] = {{"x0", fp->x0}, {"regime", fp->regime}};
  } else {
    j["initial"] = "uniform_component_mean";
  }
  return j;
}

namespace {

struct EnsemblePartial {
  MomentAccumulator moments;
  std::uint64_t rejected = 0;
};

}  // namespace

EstimatorReport ensemble_estimate(const SdewsSystem& system,
                                  const SimulationPlan& plan,
                                  const ObservableSpec& observable,
                                  const std::optional<HistogramSpec>& histogram) {
  plan.validate(system);
  observable.validate(system.dimension());
  if (histogram) {
    histogram->validate();
    if (histogram->dimension() != system.dimension()) {
      throw ConfigError("histogram dimension does not match the system");
    }
  }

  const std::size_t max_workers = resolve_workers(plan.workers);
  std::vector<Histogram> worker_hist;
  if (histogram) worker_hist.assign(max_workers, Histogram(*histogram));

  auto partials = run_blocks<EnsemblePartial>(
      plan.trajectories, plan.workers,
      [&](std::size_t worker, std::uint64_t begin, std::uint64_t end) {
        TrajectoryRunner runner(system, plan);
        EnsemblePartial p;
        for (std::uint64_t i = begin; i < end; ++i) {
          const TrajectoryState s = runner.run(i);
          p.moments.add(observable(s.x, s.mu));
          p.rejected += s.rejected ? 1 : 0;
          if (histogram) worker_hist[worker].add(s.x);
        }
        return p;
      });

  const EnsemblePartial total = tree_reduce(
      std::move(partials), [](EnsemblePartial a, EnsemblePartial b) {
        a.moments.merge(b.moments);
        a.rejected += b.rejected;
        return a;
      });

  EstimatorReport report;
  report.samples = total.moments.count;
  report.estimate = total.moments.mean();
  report.rejected_count = total.rejected;
  if (report.samples >= 2) {
    report.sample_variance = total.moments.variance();
    report.mc_half_width =
        2.0 * std::sqrt(*report.sample_variance / static_cast<double>(report.samples));
  } else {
    report.warnings.emplace_back("M < 2: Monte Carlo error unavailable");
  }
  if (histogram) {
    Histogram merged(*histogram);
    for (const auto& h : worker_hist) merged.merge(h);
    if (const MixtureModel* model = system.model();
        model != nullptr && system.kind() == SdewsSystem::Kind::kErgodicMixture) {
      TvdResult tvd = tvd_estimate(merged, *model);
      report.tvd = tvd.tvd;
      for (auto& w : tvd.warnings) report.warnings.push_back(std::move(w));
    }
    report.histogram = std::move(merged);
  }
  report.manifest = plan_to_json(plan);
  report.manifest["observable"] = observable.name();
  report.manifest["rejected"] = report.rejected_count;
  return report;
}

EstimatorReport time_average_estimate(const SdewsSystem& system,
                                      const SimulationPlan& plan,
                                      const ObservableSpec& observable) {
  plan.validate(system);
  observable.validate(system.dimension());
  if (plan.averaging_steps < 1) {
    throw ConfigError("time averaging needs L >= 1 averaging steps");
  }
  struct Replica {
    MomentAccumulator means;
    std::uint64_t rejected = 0;
  };
  auto partials = run_blocks<Replica>(
      plan.trajectories, plan.workers,
      [&](std::size_t, std::uint64_t begin, std::uint64_t end) {
        TrajectoryRunner runner(system, plan);
        Replica r;
        for (std::uint64_t i = begin; i < end; ++i) {
          CompensatedSum path_sum;
          const TrajectoryState last = runner.run_path(
              i, plan.averaging_steps, [&](const TrajectoryState& s) {
                path_sum.add(observable(s.x, s.mu));
              });
          r.means.add(path_sum.value() /
                      static_cast<double>(plan.averaging_steps));
          r.rejected += last.rejected ? 1 : 0;
        }
        return r;
      },
      /*block_size=*/1);

  const Replica total =
      tree_reduce(std::move(partials), [](Replica a, Replica b) {
        a.means.merge(b.means);
        a.rejected += b.rejected;
        return a;
      });

  EstimatorReport report;
  report.samples = total.means.count;
  report.estimate = total.means.mean();
  report.rejected_count = total.rejected;
  if (report.samples >= 2) {
    // Replica means are i.i.d.; the same 2 sqrt(D / R) rule applies.
    report.sample_variance = total.means.variance();
    report.mc_half_width =
        2.0 * std::sqrt(*report.sample_variance / static_cast<double>(report.samples));
  }
  report.manifest = plan_to_json(plan);
  report.manifest["observable"] = observable.name();
  report.manifest["estimator"] = "time_average";
  return report;
}

RegimeOccupation regime_occupation(const SdewsSystem& system,
                                   const SimulationPlan& plan) {
  plan.validate(system);
  const std::size_t m0 = system.regimes();
  auto partials = run_blocks<RegimeOccupation>(
      plan.trajectories, plan.workers,
      [&](std::size_t, std::uint64_t begin, std::uint64_t end) {
        TrajectoryRunner runner(system, plan);
        RegimeOccupation occ;
        occ.counts.assign(m0, 0);
        for (std::uint64_t i = begin; i < end; ++i) {
          const TrajectoryState s = runner.run(i);
          ++occ.counts[s.mu];
          occ.rejected += s.rejected ? 1 : 0;
        }
        return occ;
      });
  RegimeOccupation total;
  total.counts.assign(m0, 0);
  for (const auto& p : partials) {
    for (std::size_t m = 0; m < m0; ++m) total.counts[m] += p.counts[m];
    total.rejected += p.rejected;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Convergence studies

std::optional<LogLogFit> fit_loglog(std::span<const double> x,
                                    std::span<const double> y,
                                    std::span<const double> weights) {
  if (x.size() != y.size() || x.size() != weights.size()) {
    throw std::invalid_argument("fit_loglog: size mismatch");
  }
  double sw = 0.0, sx = 0.0, sy = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !(weights[i] > 0.0)) continue;
    sw += weights[i];
    sx += weights[i] * std::log(x[i]);
    sy += weights[i] * std::log(y[i]);
    ++used;
  }
  if (used < 2) return std::nullopt;
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !(weights[i] > 0.0)) continue;
    const double dx = std::log(x[i]) - mx;
    sxx += weights[i] * dx * dx;
    sxy += weights[i] * dx * (std::log(y[i]) - my);
  }
  if (!(sxx > 0.0)) return std::nullopt;
  const double slope = sxy / sxx;
  return LogLogFit{slope, my - slope * mx, used};
}

void fit_study(ConvergenceStudy& study) {
  std::vector<double> hs, bias, w, tvd_h, tvd, ones;
  for (const auto& r : study.rows) {
    if (r.in_fit) {
      hs.push_back(r.h);
      bias.push_back(std::abs(r.error));
      w.push_back(1.0 / (r.mc_half_width * r.mc_half_width));
    }
    if (r.tvd) {
      tvd_h.push_back(r.h);
      tvd.push_back(*r.tvd);
      ones.push_back(1.0);
    }
  }
  study.bias_fit = fit_loglog(hs, bias, w);
  study.tvd_fit = fit_loglog(tvd_h, tvd, ones);
}

ConvergenceStudy convergence_study(
    const SdewsSystem& system, const SimulationPlan& plan_template,
    double horizon, std::span<const double> steps,
    const ObservableSpec& observable, double reference,
    const std::optional<HistogramSpec>& histogram,
    const std::function<void(const ConvergenceRow&)>& on_row) {
  if (steps.empty()) throw ConfigError("convergence study needs at least one h");
  ConvergenceStudy study;
  for (double h : steps) {
    SimulationPlan plan = plan_template;
    plan.h = h;
    plan.steps = steps_for_horizon(horizon, h);
    plan.seed = mix_seed(plan_template.seed, std::bit_cast<std::uint64_t>(h));
    const EstimatorReport report =
        ensemble_estimate(system, plan, observable, histogram);

    ConvergenceRow row;
    row.h = h;
    row.trajectories = plan.trajectories;
    row.horizon = horizon;
    row.estimate = report.estimate;
    row.error = report.estimate - reference;
    row.mc_half_width = report.mc_half_width.value_or(0.0);
    row.tvd = report.tvd;
    row.rejected = report.rejected_count;
    row.seed = plan.seed;
    row.in_fit = report.mc_half_width.has_value() && row.mc_half_width > 0.0 &&
                 std::abs(row.error) >= 2.0 * row.mc_half_width;
    study.rows.push_back(row);
    if (on_row) on_row(row);
  }
  fit_study(study);
  return study;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{}", v);
}

std::string convergence_csv(const ConvergenceStudy& study) {
  std::string out = "h,M,T,phi_hat,error,mc_half_width,tvd\n";
  for (const auto& r : study.rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", format_double(r.h),
                       r.trajectories, format_double(r.horizon),
                       format_double(r.estimate), format_double(r.error),
                       format_double(r.mc_half_width),
                       r.tvd ? format_double(*r.tvd) : std::string());
  }
  return out;
}

std::string histogram_csv(const Histogram& histogram,
                          std::span<const double> exact_masses) {
  const HistogramSpec& spec = histogram.spec();
  const double n = static_cast<double>(std::max<std::uint64_t>(histogram.total(), 1));
  const auto& counts = histogram.counts();
  std::string out;
  if (spec.dimension() == 1) {
    out = "bin_lo,bin_hi,count,empirical_density,exact_density\n";
    const double w = spec.width(0);
    for (std::size_t i = 0; i < spec.bins[0]; ++i) {
      const double lo = spec.lo[0] + static_cast<double>(i) * w;
      out += fmt::format("{},{},{},{},{}\n", format_double(lo),
                         format_double(lo + w), counts[i],
                         format_double(static_cast<double>(counts[i]) / (n * w)),
                         format_double(exact_masses[i] / w));
    }
    return out;
  }
  out = "bin_lo,bin_hi,bin_lo_y,bin_hi_y,count,empirical_density,exact_density\n";
  const double wx = spec.width(0);
  const double wy = spec.width(1);
  for (std::size_t i = 0; i < spec.bins[0]; ++i) {
    const double x0 = spec.lo[0] + static_cast<double>(i) * wx;
    for (std::size_t j = 0; j < spec.bins[1]; ++j) {
      const double y0 = spec.lo[1] + static_cast<double>(j) * wy;
      const std::size_t b = i * spec.bins[1] + j;
      out += fmt::format(
          "{},{},{},{},{},{},{}\n", format_double(x0), format_double(x0 + wx),
          format_double(y0), format_double(y0 + wy), counts[b],
          format_double(static_cast<double>(counts[b]) / (n * wx * wy)),
          format_double(exact_masses[b] / (wx * wy)));
    }
  }
  return out;
}

}  // namespace sdews
