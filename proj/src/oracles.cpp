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

#include "sdews/oracles.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "sdews/error.hpp"

namespace sdews {

// ---------------------------------------------------------------------------
// Stationary Fokker-Planck residual

namespace {

double rho(const MixtureModel& model, std::span<const double> x, std::size_t m) {
  return std::exp(model.weighted_log_density(x, m));
}

// Central-difference dU/dx_i at y.
double fd_potential_derivative(const MixtureModel& model, std::vector<double> y,
                               std::size_t m, std::size_t i, double delta) {
  const double c = y[i];
  y[i] = c + delta;
  const double up = model.potential(y, m);
  y[i] = c - delta;
  const double down = model.potential(y, m);
  return (up - down) / (2.0 * delta);
}

}  // namespace

FpeResidual stationary_fpe_residual(const MixtureModel& model,
                                    const RatePolicy& policy,
                                    std::span<const double> x, std::size_t m,
                                    double delta) {
  if (!(delta >= 1e-5 && delta <= 1e-3)) {
    throw ConfigError("finite-difference step must lie in [1e-5, 1e-3]");
  }
  if (m >= model.regimes()) throw ConfigError("regime index out of range");
  if (x.size() != model.dimension()) {
    throw ConfigError("point has the wrong dimension");
  }
  if (model.weighted_log_density(x, m) < kLogUnderflow) return {0.0, true};

  const std::size_t d = model.dimension();
  const double rho0 = rho(model, x, m);
  double laplacian = 0.0;
  double divergence = 0.0;
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t i = 0; i < d; ++i) {
    y[i] = x[i] + delta;
    const double rho_up = rho(model, y, m);
    const double flux_up = rho_up * fd_potential_derivative(model, y, m, i, delta);
    y[i] = x[i] - delta;
    const double rho_down = rho(model, y, m);
    const double flux_down =
        rho_down * fd_potential_derivative(model, y, m, i, delta);
    y[i] = x[i];
    laplacian += (rho_up - 2.0 * rho0 + rho_down) / (delta * delta);
    divergence += (flux_up - flux_down) / (2.0 * delta);
  }

  const RateMatrix q = evaluate_rates(policy, model, x);
  double jump = -q.total_rate(m) * model.weighted_density(x, m);
  for (std::size_t j = 0; j < model.regimes(); ++j) {
    if (j != m) jump += q.q(j, m) * model.weighted_density(x, j);
  }
  return {std::abs(0.5 * laplacian + 0.5 * divergence + jump), false};
}

std::vector<double> GridSpec::points() const {
  if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ConfigError("grid must satisfy lo <= hi and step > 0");
  }
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + static_cast<double>(i) * step;
  return out;
}

FpeGridResult fpe_grid_check(const MixtureModel& model, const RatePolicy& policy,
                             const GridSpec& grid, double delta) {
  const std::size_t d = model.dimension();
  if (d > 2) throw Unsupported("FPE grid checks support d <= 2");
  const std::vector<double> axis = grid.points();
  FpeGridResult result;
  std::vector<double> x(d);
  const std::size_t ny = d == 2 ? axis.size() : 1;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      x[0] = axis[i];
      if (d == 2) x[1] = axis[j];
      for (std::size_t m = 0; m < model.regimes(); ++m) {
        const FpeResidual r = stationary_fpe_residual(model, policy, x, m, delta);
        if (r.skipped) {
          ++result.skipped;
          continue;
        }
        ++result.evaluated;
        if (r.residual > result.max_residual || result.argmax.empty()) {
          result.max_residual = r.residual;
          result.argmax = x;
          result.argmax_regime = m;
        }
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Constant-rate chains

namespace {

Eigen::MatrixXd to_eigen(const RateMatrix& q) {
  const std::size_t n = q.regimes();
  Eigen::MatrixXd out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(i, j) = q.q(i, j);
  }
  return out;
}

void check_chain(const RateMatrix& q, std::span<const double> p0, double t) {
  const std::size_t n = q.regimes();
  if (n == 0 || n > kMaxCtmcRegimes) {
    throw Unsupported("matrix exponential limited to 1..8 regimes");
  }
  if (p0.size() != n) throw ConfigError("initial distribution has the wrong size");
  if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("time must be >= 0");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && (!(q.q(i, j) >= 0.0) || !std::isfinite(q.q(i, j)))) {
        throw ConfigError("off-diagonal rates must be finite and non-negative");
      }
    }
  }
  double sum = 0.0;
  for (double p : p0) {
    if (!(p >= 0.0)) throw ConfigError("initial distribution must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ConfigError("initial distribution must sum to one");
  }
}

std::vector<double> propagate(const Eigen::MatrixXd& transition,
                              std::span<const double> p0) {
  const std::size_t n = p0.size();
  std::vector<double> p(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) p[j] += p0[i] * transition(i, j);
  }
  return p;
}

bool is_distribution(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (v < -1e-12) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= 1e-12;
}

std::vector<double> marginal_by_diagonalization(const RateMatrix& q,
                                                std::span<const double> p0,
                                                double t) {
  const Eigen::MatrixXd a = to_eigen(q);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a);
  const Eigen::MatrixXcd v = solver.eigenvectors();
  Eigen::VectorXcd e = solver.eigenvalues();
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = std::exp(t * e(i));
  const Eigen::MatrixXcd p = v * e.asDiagonal() * v.inverse();
  return propagate(p.real(), p0);
}

}  // namespace

std::vector<double> ctmc_marginal(const RateMatrix& q, std::span<const double> p0,
                                  double t) {
  check_chain(q, p0, t);
  if (t == 0.0) return {p0.begin(), p0.end()};
  const Eigen::MatrixXd transition = (t * to_eigen(q)).exp();
  std::vector<double> p = propagate(transition, p0);
  if (!is_distribution(p) && q.regimes() <= 4) {
    p = marginal_by_diagonalization(q, p0, t);
  }
  for (double& v : p) v = std::max(v, 0.0);
  return p;
}

// ---------------------------------------------------------------------------
// Linear switching test problem

void LinearSdewsSpec::validate() const {
  const std::size_t n = a.size();
  if (n == 0 || sigma.size() != n || q.regimes() != n) {
    throw ConfigError("linear spec: a, sigma and Q must have matching sizes");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(sigma[i])) {
      throw ConfigError("linear spec: a and sigma must be finite");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && (!(q.q(i, j) >= 0.0) || !std::isfinite(q.q(i, j)))) {
        throw ConfigError("linear spec: rates must be finite and non-negative");
      }
    }
  }
  if (m0 >= n) throw ConfigError("linear spec: initial regime out of range");
  if (!std::isfinite(x0)) throw ConfigError("linear spec: x0 must be finite");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw ConfigError("linear spec: horizon must be >= 0");
  }
}

LinearSdewsSpec LinearSdewsSpec::two_regime_instance() {
  LinearSdewsSpec spec;
  spec.a = {1.0, 0.2};
  spec.sigma = {1.0, 0.5};
  const std::vector<double> rates = {0.0, 1.0, 1.0, 0.0};
  spec.q = RateMatrix::from_off_diagonal(2, rates);
  spec.x0 = 1.0;
  spec.m0 = 0;
  spec.horizon = 1.0;
  return spec;
}

namespace {

// y = (p_0..p_{n-1}, M2_0..M2_{n-1}).
void moment_rhs(const LinearSdewsSpec& s, const std::vector<double>& y,
                std::vector<double>& dy) {
  const std::size_t n = s.regimes();
  for (std::size_t m = 0; m < n; ++m) {
    double dp = 0.0;
    double dm2 = -2.0 * s.a[m] * y[n + m] + s.sigma[m] * s.sigma[m] * y[m];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == m) continue;
      dp += s.q.q(j, m) * y[j] - s.q.q(m, j) * y[m];
      dm2 += s.q.q(j, m) * y[n + j] - s.q.q(m, j) * y[n + m];
    }
    dy[m] = dp;
    dy[n + m] = dm2;
  }
}

std::vector<double> rk4_moments(const LinearSdewsSpec& s, std::size_t steps) {
  const std::size_t n = s.regimes();
  std::vector<double> y(2 * n, 0.0);
  y[s.m0] = 1.0;
  y[n + s.m0] = s.x0 * s.x0;
  if (steps == 0 || s.horizon == 0.0) return y;
  const double h = s.horizon / static_cast<double>(steps);
  std::vector<double> k1(2 * n), k2(2 * n), k3(2 * n), k4(2 * n), tmp(2 * n);
  for (std::size_t step = 0; step < steps; ++step) {
    moment_rhs(s, y, k1);
    for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    moment_rhs(s, tmp, k2);
    for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    moment_rhs(s, tmp, k3);
    for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + h * k3[i];
    moment_rhs(s, tmp, k4);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
  }
  return y;
}

}  // namespace

LinearMomentResult linear_moment_reference(const LinearSdewsSpec& spec) {
  spec.validate();
  constexpr std::size_t kSteps = 10000;  // step 1e-4 T
  const std::vector<double> coarse = rk4_moments(spec, kSteps);
  const std::vector<double> fine = rk4_moments(spec, 2 * kSteps);
  const std::size_t n = spec.regimes();

  LinearMomentResult result;
  result.p.assign(fine.begin(), fine.begin() + static_cast<std::ptrdiff_t>(n));
  result.m2.assign(fine.begin() + static_cast<std::ptrdiff_t>(n), fine.end());
  double coarse_moment = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    result.second_moment += result.m2[m];
    coarse_moment += coarse[n + m];
  }
  double diff = std::abs(result.second_moment - coarse_moment);
  for (std::size_t i = 0; i < fine.size(); ++i) {
    diff = std::max(diff, std::abs(fine[i] - coarse[i]));
  }
  result.oracle_error = diff;
  if (!(diff <= 1e-10 * std::max(1.0, std::abs(result.second_moment)))) {
    throw OracleFailure("moment ODE step-halving check failed (difference " +
                        std::to_string(diff) + ")");
  }
  return result;
}

SdewsSystem linear_system(const LinearSdewsSpec& spec) {
  spec.validate();
  const std::size_t n = spec.regimes();
  std::vector<double> rates(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) rates[i * n + j] = spec.q.q(i, j);
    }
  }
  auto drift = [a = spec.a](double, std::span<const double> x, std::size_t m,
                            std::span<double> out) { out[0] = -a[m] * x[0]; };
  auto diffusion = [s = spec.sigma](double, std::span<const double>,
                                    std::size_t m,
                                    std::span<double> out) { out[0] = s[m]; };
  return SdewsSystem::general(1, n, drift, diffusion,
                              RatePolicy::constant(n, std::move(rates)));
}

// ---------------------------------------------------------------------------
// Fixtures

nlohmann::json to_json(const OracleFixture& fixture) {
  return {{"name", fixture.name},
          {"value", fixture.value},
          {"oracle_error", fixture.oracle_error},
          {"method", fixture.method}};
}

OracleFixture fixture_from_json(const nlohmann::json& j) {
  OracleFixture f;
  f.name = j.at("name").get<std::string>();
  f.value = j.at("value").get<double>();
  f.oracle_error = j.at("oracle_error").get<double>();
  f.method = j.at("method").get<std::string>();
  return f;
}

namespace {

QuadratureSpec oracle_quadrature(std::size_t d) {
  QuadratureSpec spec;
  if (d == 1) {
    spec.domain = Box{{-12.0}, {12.0}};
    spec.base_panels = 256;
  } else {
    spec.domain = Box{{-10.0, -10.0}, {10.0, 10.0}};
    spec.base_panels = 64;
    spec.max_levels = 6;
  }
  return spec;
}

Observable preset_observable(const MixtureModel& model) {
  return model.dimension() == 1 ? Observable::kSecondMoment
                                : Observable::kSquaredNorm;
}

}  // namespace

std::vector<OracleFixture> preset_fixtures(const std::string& preset_name) {
  const MixtureModel model = preset(preset_name);
  const QuadratureSpec spec = oracle_quadrature(model.dimension());
  const QuadratureResult z = integrate_with_truncation_check(
      [&](std::span<const double> x) { return model.mixture_density(x); }, spec);
  const QuadratureResult num = integrate_with_truncation_check(
      [&](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s * model.mixture_density(x);
      },
      spec);
  const double phi_quad = num.value / z.value;
  const double phi_err = std::abs(phi_quad) * (num.error_estimate / std::abs(num.value) +
                                               z.error_estimate / std::abs(z.value));

  OracleFixture zf{preset_name + ".Z", z.value, z.error_estimate,
                   "composite Simpson, doubled-domain truncation check"};
  OracleFixture pf{preset_name + ".phi_erg", phi_quad, phi_err,
                   "ratio of composite Simpson quadratures"};
  if (model.all_gaussian()) {
    const double z_closed = normalization_constant(model);
    const double phi_closed = exact_observable(model, preset_observable(model));
    zf = {zf.name, z_closed, std::max(zf.oracle_error, std::abs(z_closed - z.value)),
          "closed form, cross-checked by quadrature"};
    pf = {pf.name, phi_closed,
          std::max(pf.oracle_error, std::abs(phi_closed - phi_quad)),
          "closed form, cross-checked by quadrature"};
  }
  return {zf, pf};
}

std::vector<OracleFixture> standard_fixtures() {
  std::vector<OracleFixture> out;
  for (const auto& name : preset_names()) {
    for (auto& f : preset_fixtures(name)) out.push_back(std::move(f));
  }

  const std::vector<double> rates = {0.0, 1.0, 1.0, 0.0};
  const RateMatrix q = RateMatrix::from_off_diagonal(2, rates);
  const std::vector<double> p0 = {1.0, 0.0};
  const double p_pade = ctmc_marginal(q, p0, 1.0)[0];
  const double p_diag = marginal_by_diagonalization(q, p0, 1.0)[0];
  out.push_back({"ctmc.two_state.p0", p_pade,
                 std::max(std::abs(p_pade - p_diag), 1e-16),
                 "Pade matrix exponential, cross-checked by diagonalization"});

  const LinearMomentResult lin =
      linear_moment_reference(LinearSdewsSpec::two_regime_instance());
  out.push_back({"linear.two_regime.second_moment", lin.second_moment,
                 std::max(lin.oracle_error, 1e-16),
                 "RK4 moment ODE with step-halving check"});
  return out;
}

}  // namespace sdews
