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

#include <iosfwd>

#include <nlohmann/json.hpp>

#include "run_config.hpp"

namespace sdews::cli {

/// Executes a finalized config, writes its artifacts under
/// config.output_dir and returns the process exit code.
int run(const RunConfig& config, std::ostream& out);

/// Manifest shared by every command: config echo, seed, version, wall time.
nlohmann::json make_manifest(const RunConfig& config, double wall_seconds);

}  // namespace sdews::cli
