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

// Independent reference computations used only by the tests. None of these
// call into the solver code paths they are compared against.

#include <Eigen/Dense>

#include <vector>

#include "oopdmp/grid.hpp"

namespace oracle {

/// Closed-form belief of a two-mode chain with rates a (0 -> 1) and c (1 -> 0).
Eigen::VectorXd two_mode_belief(double a, double c, const Eigen::VectorXd& q, double t);

/// RK4 integration of the survival-conditioned belief ODE, written out from
/// the componentwise form.
Eigen::VectorXd rk4_conditioned(const Eigen::MatrixXd& rates, const Eigen::VectorXd& gamma,
                                Eigen::VectorXd q, double t, int steps);

/// Dijkstra on the 8-neighbour graph, edge weight = length / harmonic-mean
/// speed. Target points are sources; obstacles are removed.
std::vector<double> dijkstra8(const oopdmp::Grid2D& grid, const std::vector<double>& speed);

/// One explicit upwind step at interior point (i, j) of a plain 2D array,
/// written from the scheme's formula.
double upwind_step(const std::vector<std::vector<double>>& v, int i, int j, double h, double f,
                   double k, double dt);

/// Finite-horizon problem for the brute-force dynamic programs.
struct DpProblem {
    const oopdmp::Grid2D* grid = nullptr;
    std::vector<std::vector<double>> running;   // per mode
    std::vector<std::vector<double>> terminal;  // per mode
    std::vector<double> speed;
    Eigen::MatrixXd rates;
    Eigen::VectorXd initial;  // belief at t = 0 (belief DP only)
    double horizon = 1.0;
};

/// Discrete-time DP over 16 quantized headings plus standing still, with the
/// belief-averaged running cost. Returns the t = 0 slice.
std::vector<double> dp_belief_finite(const DpProblem& p);

/// Coupled discrete-time DP of the fully observed problem, per mode at t = 0.
std::vector<std::vector<double>> dp_full_finite(const DpProblem& p);

/// Discounted stationary DP u = min_a [dt K + e^{-beta dt} u(x + dt f a)],
/// iterated to a fixed point.
std::vector<double> dp_discounted(const oopdmp::Grid2D& grid, const std::vector<double>& running,
                                  const std::vector<double>& speed, double beta);

/// Expected cost of a straight run of duration tau at unit running cost k with
/// termination rate gamma and penalty phi.
double corridor_cost(double k, double gamma, double phi, double tau);

}  // namespace oracle
