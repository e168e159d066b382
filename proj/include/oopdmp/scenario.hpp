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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oopdmp/fields.hpp"
#include "oopdmp/grid.hpp"
#include "oopdmp/mode_chain.hpp"

namespace oopdmp {

enum class Regime { finite, infinite_periodic, indefinite, randomly_terminated };
enum class ObservationKind { none, scheduled, bounded, paid };

const char* to_string(Regime r);
const char* to_string(ObservationKind k);

struct ObservationSpec {
    ObservationKind kind = ObservationKind::none;
    std::vector<double> times;  // scheduled
    int count = 0;              // bounded
    FieldSpec cost;             // paid

    bool operator==(const ObservationSpec&) const = default;
};

struct SolveOptions {
    Regime regime = Regime::finite;
    ObservationSpec observations;
    std::optional<double> horizon;  // T, period, or indefinite override
    double discount = 0.0;
    double tol = 1e-6;
    int max_iters = 500;
    bool fully_observed = false;
    double memory_budget_mb = 1024.0;

    bool operator==(const SolveOptions&) const = default;
};

enum class BeliefKind { mode, distribution, stationary };

struct InitialBelief {
    BeliefKind kind = BeliefKind::mode;
    int mode = 0;
    std::vector<double> distribution;

    bool operator==(const InitialBelief&) const = default;
};

struct ModeSpec {
    FieldSpec cost;
    FieldSpec terminal = FieldSpec::constant(0.0);
    std::optional<FieldSpec> premature;

    bool operator==(const ModeSpec&) const = default;
};

/// Complete problem description as written in a scenario document.
struct ScenarioSpec {
    std::string name;
    int subdivisions = 100;
    std::vector<ModeSpec> modes;
    std::vector<std::vector<double>> rates;
    std::vector<double> termination_rates;
    FieldSpec speed = FieldSpec::constant(1.0);
    std::optional<FieldSpec> broken_speed;
    std::vector<ShapeSpec> obstacles;
    std::vector<ShapeSpec> target;
    SolveOptions solve;
    InitialBelief initial_belief;
    std::optional<Point2> start;
    std::uint64_t seed = 0;
    std::string time_units = "time";

    /// Directory used to resolve relative raster paths (not serialized).
    std::string base_dir;

    bool operator==(const ScenarioSpec& other) const;
};

/// Parses and validates a scenario document. All problems are collected and
/// reported together in the thrown InputError.
ScenarioSpec parse_scenario(const std::string& text, const std::string& base_dir = ".");
ScenarioSpec load_scenario(const std::string& path);

/// Canonical JSON rendering with every default written out.
std::string serialize_scenario(const ScenarioSpec& spec);

/// A scenario sampled onto its grid.
struct Problem {
    ScenarioSpec spec;
    Grid2D grid;
    SpeedField speed;
    std::optional<SpeedField> broken_speed;
    ModeChain chain;
    CostBundle costs;
    Slice observation_cost;  // paid observations only
    Distribution initial;    // resolved initial belief

    int modes() const { return chain.modes(); }
    const SolveOptions& options() const { return spec.solve; }
};

/// Rasterizes fields and masks and resolves the initial belief.
Problem build_problem(const ScenarioSpec& spec);

/// Resolves a raster path against the scenario directory.
std::string resolve_path(const std::string& base_dir, const std::string& path);

}  // namespace oopdmp
