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

#include "sdews/switching.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sdews/error.hpp"

namespace sdews {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

RateMatrix::RateMatrix(std::size_t regimes)
    : regimes_(regimes), q_(regimes * regimes, 0.0) {}

void RateMatrix::finalize() {
  for (std::size_t i = 0; i < regimes_; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < regimes_; ++j) {
      if (j != i) total += q_[i * regimes_ + j];
    }
    q_[i * regimes_ + i] = -total;
  }
}

RateMatrix RateMatrix::from_off_diagonal(std::size_t regimes,
                                         std::span<const double> q) {
  if (q.size() != regimes * regimes) {
    throw std::invalid_argument("rate matrix must have m0 * m0 entries");
  }
  RateMatrix out(regimes);
  for (std::size_t i = 0; i < regimes; ++i) {
    for (std::size_t j = 0; j < regimes; ++j) {
      if (i == j) continue;
      const double v = q[i * regimes + j];
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ConfigError("off-diagonal rates must be finite and non-negative");
      }
      out.set(i, j, v);
    }
  }
  out.finalize();
  return out;
}

RatePolicy::RatePolicy(RatePolicyKind kind) : kind_(std::move(kind)) {
  std::visit(Overloaded{
                 [](const DensityProportional&) {},
                 [](const DensityScaled& s) {
                   for (double b : s.betas) {
                     if (!(b > 0.0) || !std::isfinite(b)) {
                       throw ConfigError("density_scaled betas must be positive");
                     }
                   }
                 },
                 [](const ConstantMatrix& c) {
                   if (c.q.size() != c.regimes * c.regimes) {
                     throw ConfigError("constant rate matrix must be m0 x m0");
                   }
                   for (std::size_t i = 0; i < c.regimes; ++i) {
                     for (std::size_t j = 0; j < c.regimes; ++j) {
                       const double v = c.q[i * c.regimes + j];
                       if (i != j && (!(v >= 0.0) || !std::isfinite(v))) {
                         throw ConfigError(
                             "constant off-diagonal rates must be non-negative");
                       }
                     }
                   }
                 },
                 [](const CustomRates& c) {
                   if (!c.fill) throw ConfigError("custom rates need a function");
                 },
             },
             kind_);
}

bool RatePolicy::uses_model() const {
  return std::holds_alternative<DensityProportional>(kind_) ||
         std::holds_alternative<DensityScaled>(kind_);
}

void RatePolicy::validate(const MixtureModel* model) const {
  if (uses_model() && model == nullptr) {
    throw ConfigError("density-based rate policies need a mixture model");
  }
  if (const auto* s = std::get_if<DensityScaled>(&kind_)) {
    if (s->betas.size() != model->regimes()) {
      throw ConfigError("density_scaled needs one beta per mixture component");
    }
  }
  if (const auto* c = std::get_if<ConstantMatrix>(&kind_)) {
    if (model != nullptr && c->regimes != model->regimes()) {
      throw ConfigError("constant rate matrix size does not match the mixture");
    }
  }
}

std::optional<double> RatePolicy::regime_bound(const MixtureModel* model,
                                               std::size_t i) const {
  return std::visit(
      Overloaded{
          [&](const DensityProportional&) -> std::optional<double> {
            double total = 0.0;
            for (std::size_t j = 0; j < model->regimes(); ++j) {
              if (j != i) total += model->component(j).density_supremum();
            }
            return total;
          },
          [&](const DensityScaled& s) -> std::optional<double> {
            double total = 0.0;
            for (std::size_t j = 0; j < model->regimes(); ++j) {
              if (j != i) {
                total += model->component(j).density_supremum() /
                         (s.betas[j] * s.betas[i]);
              }
            }
            return total;
          },
          [&](const ConstantMatrix& c) -> std::optional<double> {
            double total = 0.0;
            for (std::size_t j = 0; j < c.regimes; ++j) {
              if (j != i) total += c.q[i * c.regimes + j];
            }
            return total;
          },
          [&](const CustomRates& c) -> std::optional<double> { return c.bound; },
      },
      kind_);
}

std::optional<double> RatePolicy::rate_bound(const MixtureModel* model) const {
  std::size_t regimes = 0;
  if (const auto* c = std::get_if<ConstantMatrix>(&kind_)) {
    regimes = c->regimes;
  } else if (const auto* c = std::get_if<CustomRates>(&kind_)) {
    return c->bound;
  } else {
    regimes = model->regimes();
  }
  double ell = 0.0;
  for (std::size_t i = 0; i < regimes; ++i) {
    ell = std::max(ell, *regime_bound(model, i));
  }
  return ell;
}

namespace {

double exp_or_zero(double log_value) {
  return log_value < kLogUnderflow ? 0.0 : std::exp(log_value);
}

}  // namespace

double RatePolicy::row(const MixtureModel* model, std::span<const double> x,
                       std::size_t i, std::span<double> out) const {
  return std::visit(
      Overloaded{
          [&](const DensityProportional&) {
            double total = 0.0;
            for (std::size_t j = 0; j < out.size(); ++j) {
              if (j == i) {
                out[j] = 0.0;
                continue;
              }
              const auto& c = model->components()[j];
              out[j] = exp_or_zero(c.log_alpha() - c.potential(x));
              total += out[j];
            }
            return total;
          },
          [&](const DensityScaled& s) {
            double total = 0.0;
            const double log_beta_i = std::log(s.betas[i]);
            for (std::size_t j = 0; j < out.size(); ++j) {
              if (j == i) {
                out[j] = 0.0;
                continue;
              }
              const auto& c = model->components()[j];
              out[j] = exp_or_zero(c.log_alpha() - c.potential(x) -
                                   std::log(s.betas[j]) - log_beta_i);
              total += out[j];
            }
            return total;
          },
          [&](const ConstantMatrix& c) {
            double total = 0.0;
            for (std::size_t j = 0; j < out.size(); ++j) {
              out[j] = (j == i) ? 0.0 : c.q[i * c.regimes + j];
              total += out[j];
            }
            return total;
          },
          [&](const CustomRates& c) {
            const std::size_t m0 = out.size();
            std::vector<double> full(m0 * m0, 0.0);
            c.fill(x, full);
            double total = 0.0;
            for (std::size_t j = 0; j < m0; ++j) {
              const double v = full[i * m0 + j];
              if (j != i && (!(v >= 0.0) || !std::isfinite(v))) {
                throw NumericalGuardError(
                    "custom rate function returned a negative or non-finite rate");
              }
              out[j] = (j == i) ? 0.0 : v;
              total += out[j];
            }
            return total;
          },
      },
      kind_);
}

RateMatrix evaluate_rates(const RatePolicy& policy, const MixtureModel* model,
                          std::span<const double> x) {
  policy.validate(model);
  for (double v : x) {
    if (!std::isfinite(v)) throw std::domain_error("rates need a finite point");
  }
  std::size_t regimes = 0;
  if (const auto* c = std::get_if<ConstantMatrix>(&policy.kind())) {
    regimes = c->regimes;
  } else if (model != nullptr) {
    regimes = model->regimes();
  } else {
    throw ConfigError("custom rate policy needs a model to size Q(x)");
  }
  RateMatrix out(regimes);
  std::vector<double> row(regimes);
  for (std::size_t i = 0; i < regimes; ++i) {
    policy.row(model, x, i, row);
    for (std::size_t j = 0; j < regimes; ++j) {
      if (j != i) out.set(i, j, row[j]);
    }
  }
  out.finalize();
  return out;
}

DetailedBalanceResult detailed_balance_residual(const RatePolicy& policy,
                                                const MixtureModel& model,
                                                std::span<const double> x) {
  const RateMatrix rates = evaluate_rates(policy, model, x);
  DetailedBalanceResult result;
  const std::size_t m0 = model.regimes();
  for (std::size_t j = 0; j < m0; ++j) {
    for (std::size_t m = 0; m < m0; ++m) {
      if (j == m) continue;
      const double log_rho_m = model.weighted_log_density(x, m);
      const double log_rho_j = model.weighted_log_density(x, j);
      const double q_jm = rates.q(j, m);
      const double q_mj = rates.q(m, j);
      if (log_rho_m < kLogUnderflow || log_rho_j < kLogUnderflow ||
          !(q_jm > 0.0) || !(q_mj > 0.0)) {
        result.skipped.emplace_back(j, m);
        continue;
      }
      const double r = std::abs(std::log(q_jm) - std::log(q_mj) - log_rho_m +
                                log_rho_j);
      result.residual = std::max(result.residual, r);
    }
  }
  return result;
}

std::size_t switch_step_row(std::span<const double> row, double total_rate,
                            std::size_t mu, double h, double u,
                            std::span<const double> x) {
  if (total_rate * h > 1.0) {
    throw StepSizeViolation(std::vector<double>(x.begin(), x.end()), mu,
                            total_rate, h);
  }
  double cumulative = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (j == mu) continue;
    cumulative += row[j] * h;
    if (u < cumulative) return j;
  }
  return mu;
}

std::size_t switch_step(const RateMatrix& rates, std::size_t mu, double h,
                        double u, std::span<const double> x) {
  if (mu >= rates.regimes()) {
    throw std::out_of_range("regime index out of range in switch_step");
  }
  return switch_step_row(rates.row(mu), rates.total_rate(mu), mu, h, u, x);
}

SkorokhodTable::SkorokhodTable(const RateMatrix& rates, std::optional<double> ell)
    : regimes_(rates.regimes()),
      intervals_(regimes_ * regimes_),
      row_offsets_(regimes_, 0.0) {
  double offset = 0.0;
  double local_max = 0.0;
  for (std::size_t i = 0; i < regimes_; ++i) {
    row_offsets_[i] = offset;
    for (std::size_t j = 0; j < regimes_; ++j) {
      if (j == i) {
        intervals_[i * regimes_ + j] = {offset, offset};
        continue;
      }
      const double len = rates.q(i, j);
      intervals_[i * regimes_ + j] = {offset, offset + len};
      offset += len;
    }
    local_max = std::max(local_max, rates.total_rate(i));
  }
  ell_ = ell.value_or(local_max);
  const double m0 = static_cast<double>(regimes_);
  bound_ = m0 * (m0 - 1.0) * ell_;
}

long SkorokhodTable::jump(std::size_t i, double z) const {
  long f = 0;
  for (std::size_t j = 0; j < regimes_; ++j) {
    const Interval& g = interval(i, j);
    if (j != i && !g.empty() && g.contains(z)) {
      f += static_cast<long>(j) - static_cast<long>(i);
    }
  }
  return f;
}

SkorokhodTable skorokhod_intervals(const RateMatrix& rates,
                                   std::optional<double> ell) {
  return SkorokhodTable(rates, ell);
}

StepSizeViolation::StepSizeViolation(std::vector<double> x, std::size_t regime,
                                     double total_rate, double h)
    : NumericalGuardError(
          "step-size guard: h * q_mu(x) = " + std::to_string(h * total_rate) +
          " > 1 (h = " + std::to_string(h) + ", q_mu = " +
          std::to_string(total_rate) + ", regime " + std::to_string(regime) +
          "); use a smaller step"),
      x_(std::move(x)),
      regime_(regime),
      total_rate_(total_rate),
      h_(h) {}

}  // namespace sdews
