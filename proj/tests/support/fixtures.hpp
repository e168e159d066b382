/*
 Copyright 2026 The oopdmp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "oopdmp/scenario.hpp"

namespace fixture {

/// Absolute path of a bundled scenario file.
std::string scenario_path(const std::string& name);

/// Loads a bundled scenario, optionally at another resolution.
oopdmp::ScenarioSpec load(const std::string& name, std::optional<int> subdivisions = {});

oopdmp::Problem problem(const std::string& name, std::optional<int> subdivisions = {});

/// Fresh empty directory under the system temporary directory.
std::string temp_dir(const std::string& tag);

/// Runs the command-line tool in a child process; returns its exit status and
/// captures stdout.
int run_tool(const std::vector<std::string>& args, std::string* output = nullptr);

std::string read_file(const std::string& path);

/// Minimal single-mode scenario on an open square.
oopdmp::ScenarioSpec open_square(int subdivisions, oopdmp::Regime regime, double horizon);

}  // namespace fixture
