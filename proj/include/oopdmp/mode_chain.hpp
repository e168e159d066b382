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

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "oopdmp/core.hpp"

namespace oopdmp {

/// Probability vector over modes.
using Distribution = Eigen::VectorXd;

/// Continuous-time Markov chain over M modes with optional per-mode
/// termination (killing) rates.
class ModeChain {
public:
    /// Validates the generator. Row sums within 1e-12 of zero are repaired on
    /// the diagonal; larger violations, negative off-diagonal rates and
    /// negative termination rates throw InputError.
    explicit ModeChain(Eigen::MatrixXd rates, Eigen::VectorXd termination = Eigen::VectorXd());

    int modes() const noexcept { return static_cast<int>(rates_.rows()); }
    const Eigen::MatrixXd& rates() const noexcept { return rates_; }
    const Eigen::VectorXd& termination_rates() const noexcept { return gamma_; }

    /// Total switching rate out of mode i.
    double exit_rate(int i) const { return -rates_(i, i); }
    double max_exit_rate() const;
    double max_termination_rate() const;
    double min_termination_rate() const;
    bool has_termination() const { return max_termination_rate() > 0.0; }

    /// True when every mode can reach every other through positive rates.
    bool irreducible() const;

    /// Same chain with every switching rate multiplied by factor.
    ModeChain scaled(double factor) const;

private:
    Eigen::MatrixXd rates_;
    Eigen::VectorXd gamma_;
};

/// e_m in R^M.
Distribution basis_belief(int modes, int m);

/// Index m when q is (numerically) e_m, otherwise -1.
int basis_index(const Distribution& q);

/// Throws InputError unless q has M entries in [0,1] summing to 1 within 1e-10.
void require_distribution(const Distribution& q, int modes, const char* what);

/// q exp(t Lambda), renormalized.
Distribution propagate_belief(const ModeChain& chain, const Distribution& q, double t);

/// Unique q_s with q_s Lambda = 0. Throws InputError for reducible chains.
Distribution stationary_distribution(const ModeChain& chain);

/// Belief conditioned on survival: normalize(q exp(t (Lambda - diag gamma))).
/// Throws NumericalError when the surviving mass underflows 1e-300.
Distribution conditioned_belief(const ModeChain& chain, const Distribution& q, double t);

/// Limit of conditioned_belief as t grows, taken as the normalized dominant
/// left eigenvector of Lambda - diag(gamma). Reduces to the stationary
/// distribution when gamma is zero and the chain is irreducible.
Distribution quasi_stationary_distribution(const ModeChain& chain);

/// Fixed-step RK4 integration of the nonlinear survival-conditioned belief
/// ODE. Independent route used to cross-check conditioned_belief.
Distribution conditioned_belief_ode(const ModeChain& chain, const Distribution& q, double t,
                                    int steps);

enum class CostKind { running, terminal, premature };

/// Per-mode cost fields sampled on a grid.
struct CostBundle {
    std::vector<Slice> running;
    std::vector<Slice> terminal;
    std::vector<Slice> premature;  // empty when the problem has no termination

    const std::vector<Slice>& fields(CostKind which) const;
};

/// sum_n b_n field_n(point).
double expected_cost(const CostBundle& bundle, const Distribution& b, CostKind which,
                     std::size_t point);

/// Pointwise belief-weighted combination of per-mode slices. A point where
/// any slice with positive weight holds the sentinel yields the sentinel.
void combine_slices(const Distribution& b, std::span<const Slice> slices, std::span<double> out);

/// Expected cost-to-go if the mode were observed now, given the last
/// observation was anchor_mode, t time units ago.
Slice theta(std::span<const Slice> values_at_zero, const ModeChain& chain, int anchor_mode,
            double t, bool conditioned);

struct ModeSwitch {
    double time;
    int from;
    int to;
};

/// Exact (Gillespie) sample path on [0, t_end]; deterministic for a seed.
std::vector<ModeSwitch> sample_mode_path(const ModeChain& chain, int initial_mode, double t_end,
                                         std::uint64_t seed);

}  // namespace oopdmp
