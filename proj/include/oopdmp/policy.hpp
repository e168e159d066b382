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
#include <vector>

#include "oopdmp/fields.hpp"
#include "oopdmp/solvers.hpp"

namespace oopdmp {

/// Steepest-descent direction -grad v / |grad v| from one-sided samples of
/// the stored field at distance h. Throws DegenerateGradient when the
/// gradient norm falls below eps_grad = 1e-9 K_max T / h.
Point2 policy_direction(const SolveResult& result, const Problem& problem, int layer, int anchor,
                        Point2 position, double t);

enum class EventKind { mode_switch, observation, premature_termination, goal_reached, horizon_end };

const char* to_string(EventKind k);

struct TraceEvent {
    EventKind kind;
    double time;
    int from = -1;      // mode_switch
    int mode = -1;      // new, observed or terminating mode
    double cost = 0.0;  // charge booked at this event
};

struct TracePoint {
    double time;
    Point2 position;
    int layer;
    int anchor;
    double since_observation;
    double running_cost;  // accrued running cost up to this point
};

struct SimTrace {
    std::vector<TracePoint> path;
    std::vector<TraceEvent> events;
    double realized_cost = 0.0;
    std::uint64_t seed = 0;
    bool stochastic = false;
    bool reached_target = false;
    bool terminated = false;
    int observations = 0;

    /// Running cost at the last path point plus every event charge.
    double reconstructed_cost() const;
};

struct TraceOptions {
    bool stochastic = false;
    std::uint64_t seed = 0;
    /// Observed modes returned in order by deterministic traces; once
    /// exhausted the most likely mode under the current belief is used.
    std::vector<int> scripted_modes;
    /// Deterministic traces of scenarios without observations never switch;
    /// this is the simulated mode for stochastic traces when set.
    std::optional<int> initial_mode;
    /// End time for traces of the periodic regime (default ten periods).
    std::optional<double> t_end;
    /// Disables on-demand observations (bounded and paid schemes).
    bool suppress_observations = false;
};

/// Follows the feedback policy from start. Deterministic traces accrue the
/// belief-expected cost; stochastic traces sample mode switches, premature
/// termination and observed modes from the simulated process.
SimTrace trace_trajectory(const SolveResult& result, const Problem& problem, Point2 start,
                          const TraceOptions& options = {});

struct McSummary {
    double mean = 0.0;
    double std_error = 0.0;
    int runs = 0;
    int diverged = 0;
};

/// Mean realized cost of n_runs stochastic traces with per-run seeds derived
/// from seed. Diverging runs are counted and excluded from the mean.
McSummary mc_evaluate(const SolveResult& result, const Problem& problem, Point2 start, int n_runs,
                      std::uint64_t seed);

/// Per-run seed used by mc_evaluate.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Value of the layer-0 field for the problem's initial belief at a point.
double value_at(const SolveResult& result, const Problem& problem, Point2 position, double t = 0.0);

}  // namespace oopdmp
