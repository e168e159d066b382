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

#include <map>
#include <string>
#include <vector>

#include "oopdmp/policy.hpp"
#include "oopdmp/scenario.hpp"
#include "oopdmp/solvers.hpp"

namespace oopdmp {

struct ManifestEntry {
    std::string path;  // relative to the output directory
    std::string sha256;
    std::size_t bytes = 0;
};

struct Manifest {
    std::vector<ManifestEntry> files;
    /// Command-line overrides applied on top of the scenario file.
    std::map<std::string, std::string> overrides;
};

/// Writes the scenario, every stored value slice (one little-endian float64
/// binary per layer and anchor, with a JSON sidecar), traces and manifest.json.
/// Existing files of the same names are replaced.
Manifest write_results(const SolveResult& result, const ScenarioSpec& spec,
                       const std::vector<SimTrace>& traces, const std::string& out_dir,
                       const std::map<std::string, std::string>& overrides = {});

/// Adds trace files to an existing result directory and rewrites its manifest.
Manifest append_traces(const std::string& out_dir, const std::vector<SimTrace>& traces,
                       const std::vector<std::string>& names);

struct StoredResults {
    ScenarioSpec spec;
    SolveResult result;
    Manifest manifest;
};

/// Reads a result directory back. Throws InputError when the manifest is
/// missing or a listed file's hash does not match.
StoredResults read_results(const std::string& out_dir);

std::string trace_to_json(const SimTrace& trace);
SimTrace trace_from_json(const std::string& text);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace oopdmp
