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

#include "sdews/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "sdews/error.hpp"

namespace sdews {

Box Box::doubled() const {
  Box out = *this;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    const double centre = 0.5 * (lo[i] + hi[i]);
    const double half = 0.5 * (hi[i] - lo[i]);
    out.lo[i] = centre - 2.0 * half;
    out.hi[i] = centre + 2.0 * half;
  }
  return out;
}

namespace {

double simpson_weight(std::size_t i, std::size_t n) {
  if (i == 0 || i == n) return 1.0;
  return (i % 2 == 1) ? 4.0 : 2.0;
}

void check_box(const Box& box) {
  if (box.lo.size() != box.hi.size() || box.lo.empty() || box.lo.size() > 2) {
    throw Unsupported("quadrature supports boxes in one or two dimensions");
  }
  for (std::size_t i = 0; i < box.lo.size(); ++i) {
    if (!(box.lo[i] < box.hi[i])) {
      throw std::invalid_argument("quadrature box must satisfy lo < hi");
    }
  }
}

}  // namespace

double simpson(const ScalarField& f, const Box& box, std::size_t panels) {
  check_box(box);
  if (panels == 0 || panels % 2 != 0) {
    throw std::invalid_argument("Simpson panel count must be even and positive");
  }
  const std::size_t n = panels;
  if (box.dimension() == 1) {
    const double step = (box.hi[0] - box.lo[0]) / static_cast<double>(n);
    double sum = 0.0;
    std::array<double, 1> x{};
    for (std::size_t i = 0; i <= n; ++i) {
      x[0] = box.lo[0] + static_cast<double>(i) * step;
      sum += simpson_weight(i, n) * f(x);
    }
    return sum * step / 3.0;
  }
  const double hx = (box.hi[0] - box.lo[0]) / static_cast<double>(n);
  const double hy = (box.hi[1] - box.lo[1]) / static_cast<double>(n);
  double sum = 0.0;
  std::array<double, 2> x{};
  for (std::size_t i = 0; i <= n; ++i) {
    x[0] = box.lo[0] + static_cast<double>(i) * hx;
    const double wi = simpson_weight(i, n);
    double row = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
      x[1] = box.lo[1] + static_cast<double>(j) * hy;
      row += simpson_weight(j, n) * f(x);
    }
    sum += wi * row;
  }
  return sum * hx * hy / 9.0;
}

QuadratureResult integrate(const ScalarField& f, const QuadratureSpec& spec) {
  check_box(spec.domain);
  if (spec.refinement < 2) {
    throw std::invalid_argument("quadrature refinement factor must be >= 2");
  }
  std::size_t panels = std::max<std::size_t>(2, spec.base_panels);
  if (panels % 2 != 0) ++panels;
  double previous = simpson(f, spec.domain, panels);
  for (std::size_t level = 1; level <= spec.max_levels; ++level) {
    panels *= spec.refinement;
    const double current = simpson(f, spec.domain, panels);
    const double change = std::abs(current - previous);
    if (!std::isfinite(current)) break;
    if (change <= std::max(spec.abs_tol, spec.rel_tol * std::abs(current))) {
      return {current, change / 15.0, panels};
    }
    previous = current;
  }
  throw OracleFailure("quadrature did not converge after " +
                      std::to_string(spec.max_levels) + " refinements");
}

QuadratureResult integrate_with_truncation_check(const ScalarField& f,
                                                 const QuadratureSpec& spec) {
  const QuadratureResult base = integrate(f, spec);
  QuadratureSpec wide = spec;
  wide.domain = spec.domain.doubled();
  wide.base_panels = spec.base_panels * 2;
  const QuadratureResult doubled = integrate(f, wide);
  // The doubled-domain value is returned; the change bounds the truncation of
  // the base domain and so overestimates the truncation of the wider one.
  return {doubled.value,
          doubled.error_estimate + std::abs(doubled.value - base.value),
          doubled.panels};
}

}  // namespace sdews
