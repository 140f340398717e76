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
#include <vector>

namespace sdews {

/// Axis-aligned box [lo_i, hi_i] in one or two dimensions.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dimension() const { return lo.size(); }
  // Same centre, twice the half-width on each axis.
  Box doubled() const;
};

/// Composite Simpson with successive panel doubling. A result is accepted once
/// two consecutive refinements differ by at most max(abs_tol, rel_tol * |I|).
struct QuadratureSpec {
  Box domain;
  std::size_t base_panels = 64;    // per axis, even
  std::size_t refinement = 2;      // panel multiplier per level
  std::size_t max_levels = 12;
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
};

struct QuadratureResult {
  double value;
  double error_estimate;  // |I_n - I_{n/2}| / 15
  std::size_t panels;     // per axis, final level
};

using ScalarField = std::function<double(std::span<const double>)>;

/// Integrates f over spec.domain. Throws OracleFailure when the refinement
/// sequence has not settled within spec.max_levels.
QuadratureResult integrate(const ScalarField& f, const QuadratureSpec& spec);

/// Integrates over spec.domain and over the doubled domain; returns the
/// doubled-domain value with the truncation change folded into the error.
QuadratureResult integrate_with_truncation_check(const ScalarField& f,
                                                 const QuadratureSpec& spec);

/// Fixed-rule composite Simpson on a box with n panels per axis (n even).
double simpson(const ScalarField& f, const Box& box, std::size_t panels);

}  // namespace sdews
