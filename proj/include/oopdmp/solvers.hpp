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
#include <vector>

#include "oopdmp/grid.hpp"
#include "oopdmp/mode_chain.hpp"
#include "oopdmp/scenario.hpp"

namespace oopdmp {

/// One value function: observation layer l, anchored on a belief.
struct ValueLayer {
    int layer = 0;
    /// Mode index for basis anchors; modes() for the problem's initial belief.
    int anchor = 0;
    Distribution belief;
    /// Global time at which this layer's clock starts (scheduled observations).
    double start_time = 0.0;
    ValueField values;
};

struct SolveResult {
    Regime regime = Regime::finite;
    ObservationKind observations = ObservationKind::none;
    bool fully_observed = false;
    bool conditioned = false;  // beliefs conditioned on survival
    int modes = 1;
    int layers = 1;
    double horizon_used = 0.0;
    double discount = 0.0;
    std::vector<double> schedule;  // scheduled observation times
    int iterations_used = 0;
    std::vector<double> residual_history;
    bool converged = true;
    std::vector<ValueLayer> fields;

    const ValueLayer* find(int layer, int anchor) const;
    const ValueLayer& at(int layer, int anchor) const;

    /// Anchor index that represents the given initial belief in this result.
    int anchor_for(const Distribution& belief) const;
};

/// Limits the worker count used by the grid kernels (0 keeps the default).
void set_thread_count(int threads);

/// Horizon for indefinite regimes: the user override or the bound computed
/// from the minimum-time field.
double indefinite_horizon(const Problem& problem);

SolveResult solve_finite_no_obs(const Problem& problem, const Distribution& anchor);
SolveResult solve_finite_scheduled(const Problem& problem);
SolveResult solve_infinite_periodic(const Problem& problem);
SolveResult solve_indefinite(const Problem& problem, const Distribution& anchor);
SolveResult solve_indefinite_bounded_obs(const Problem& problem);
SolveResult solve_indefinite_paid_obs(const Problem& problem);
/// Randomly terminated variant of the configured indefinite observation
/// scheme; anchor is used when observations are none.
SolveResult solve_randomly_terminated(const Problem& problem, const Distribution& anchor);
SolveResult solve_fully_observed(const Problem& problem);

/// Dispatches on the problem's regime and observation scheme. For
/// non-iterative single-anchor solves the initial belief is the anchor.
/// Iterative solves that hit max_iters return with converged = false.
SolveResult solve(const Problem& problem);

/// Expected cost-to-go if an observation were taken at time t since the
/// last observation, from the slice-0 data of the given layer.
Slice observation_value(const SolveResult& result, const ModeChain& chain, int layer,
                        const Distribution& anchor_belief, double t);

/// Observation branch minus value, (C +) Theta - V, at time t of the given
/// layer and anchor for bounded and paid solves. Nonnegative up to rounding;
/// zero where observing is optimal. Sentinel where either side is.
Slice observation_gap(const SolveResult& result, const Problem& problem, int layer, int anchor,
                      double t);

}  // namespace oopdmp
