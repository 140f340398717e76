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
#include <stdexcept>
#include <string>
#include <vector>

namespace sdews {

// Process exit codes used by the CLI.
enum class ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kNumericalGuard = 3,
  kOracleFailure = 4,
};

// Invalid user input (config, CLI flags, model parameters).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical safety check tripped during a run.
class NumericalGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the switching step when h * q_mu(x) > 1.
class StepSizeViolation : public NumericalGuardError {
 public:
  StepSizeViolation(std::vector<double> x, std::size_t regime, double total_rate,
                    double h);

  const std::vector<double>& x() const { return x_; }
  std::size_t regime() const { return regime_; }
  double total_rate() const { return total_rate_; }
  double step() const { return h_; }

 private:
  std::vector<double> x_;
  std::size_t regime_;
  double total_rate_;
  double h_;
};

// A reference computation could not certify its own result.
class OracleFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested combination of model/observable/dimension has no implementation.
class Unsupported : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace sdews
