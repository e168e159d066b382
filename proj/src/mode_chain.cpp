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

#include "oopdmp/mode_chain.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "oopdmp/diagnostics.hpp"

namespace oopdmp {

namespace {

constexpr double kRowSumRepair = 1e-12;
constexpr double kSimplexTol = 1e-10;
constexpr double kDriftWarn = 1e-8;
constexpr double kUnderflow = 1e-300;

Distribution normalized(Eigen::VectorXd raw, const char* what, bool check_drift = true) {
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        if (!std::isfinite(raw(i))) {
            throw NumericalError(std::string(what) + ": non-finite belief entry");
        }
        if (raw(i) < 0.0) raw(i) = 0.0;  // rounding below zero
    }
    const double total = raw.sum();
    if (check_drift && std::abs(total - 1.0) > kDriftWarn) {
        std::ostringstream msg;
        msg << what << ": belief mass drifted to " << total << " before renormalization";
        warn(msg.str());
    }
    return raw / total;
}

}  // namespace

ModeChain::ModeChain(Eigen::MatrixXd rates, Eigen::VectorXd termination)
    : rates_(std::move(rates)), gamma_(std::move(termination)) {
    if (rates_.rows() == 0 || rates_.rows() != rates_.cols()) {
        throw InputError("rate matrix must be square and nonempty");
    }
    const Eigen::Index m = rates_.rows();
    std::vector<std::string> problems;
    for (Eigen::Index i = 0; i < m; ++i) {
        double off = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (i == j) continue;
            if (!std::isfinite(rates_(i, j)) || rates_(i, j) < 0.0) {
                std::ostringstream msg;
                msg << "rate (" << i << "," << j << ") must be finite and nonnegative, got "
                    << rates_(i, j);
                problems.push_back(msg.str());
            }
            off += rates_(i, j);
        }
        const double row_sum = off + rates_(i, i);
        if (std::abs(row_sum) > kRowSumRepair) {
            std::ostringstream msg;
            msg << "row " << i << " of the rate matrix sums to " << row_sum << ", expected 0";
            problems.push_back(msg.str());
        } else {
            rates_(i, i) = -off;
        }
    }
    if (gamma_.size() == 0) gamma_ = Eigen::VectorXd::Zero(m);
    if (gamma_.size() != m) {
        problems.push_back("termination rates must have one entry per mode");
    } else {
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!std::isfinite(gamma_(i)) || gamma_(i) < 0.0) {
                std::ostringstream msg;
                msg << "termination rate " << i << " must be finite and nonnegative, got "
                    << gamma_(i);
                problems.push_back(msg.str());
            }
        }
    }
    if (!problems.empty()) throw InputError("invalid mode chain", problems);
}

double ModeChain::max_exit_rate() const {
    double r = 0.0;
    for (int i = 0; i < modes(); ++i) r = std::max(r, exit_rate(i));
    return r;
}

double ModeChain::max_termination_rate() const { return gamma_.maxCoeff(); }

double ModeChain::min_termination_rate() const { return gamma_.minCoeff(); }

bool ModeChain::irreducible() const {
    const int m = modes();
    auto reach_all = [&](bool transpose) {
        std::vector<char> seen(m, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (int j = 0; j < m; ++j) {
                const double r = transpose ? rates_(j, i) : rates_(i, j);
                if (j != i && r > 0.0 && !seen[j]) {
                    seen[j] = 1;
                    stack.push_back(j);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    };
    return reach_all(false) && reach_all(true);
}

ModeChain ModeChain::scaled(double factor) const {
    if (!(factor >= 0.0)) throw InputError("rate scale factor must be nonnegative");
    return ModeChain(rates_ * factor, gamma_);
}

Distribution basis_belief(int modes, int m) {
    if (m < 0 || m >= modes) throw InputError("mode index out of range");
    Distribution e = Distribution::Zero(modes);
    e(m) = 1.0;
    return e;
}

int basis_index(const Distribution& q) {
    int found = -1;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        if (q(i) == 1.0) {
            found = static_cast<int>(i);
        } else if (q(i) != 0.0) {
            return -1;
        }
    }
    return found;
}

void require_distribution(const Distribution& q, int modes, const char* what) {
    if (q.size() != modes) {
        throw InputError(std::string(what) + ": expected " + std::to_string(modes) + " entries");
    }
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        if (!std::isfinite(q(i)) || q(i) < -kSimplexTol || q(i) > 1.0 + kSimplexTol) {
            throw InputError(std::string(what) + ": entries must lie in [0,1]");
        }
    }
    if (std::abs(q.sum() - 1.0) > kSimplexTol) {
        throw InputError(std::string(what) + ": entries must sum to 1");
    }
}

Distribution propagate_belief(const ModeChain& chain, const Distribution& q, double t) {
    require_distribution(q, chain.modes(), "propagate_belief");
    if (!(t >= 0.0)) throw InputError("propagate_belief: t must be nonnegative");
    const Eigen::MatrixXd generator = chain.rates();
    const Eigen::VectorXd raw = (t * generator).exp().transpose() * q;
    return normalized(raw, "propagate_belief");
}

Distribution stationary_distribution(const ModeChain& chain) {
    const int m = chain.modes();
    if (m == 1) return Distribution::Ones(1);
    if (!chain.irreducible()) {
        throw InputError("stationary distribution is not unique: the mode chain is reducible");
    }
    Eigen::MatrixXd a = chain.rates().transpose();
    a.row(m - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rhs(m - 1) = 1.0;
    Eigen::VectorXd qs = a.fullPivLu().solve(rhs);
    return normalized(qs, "stationary_distribution");
}

Distribution conditioned_belief(const ModeChain& chain, const Distribution& q, double t) {
    require_distribution(q, chain.modes(), "conditioned_belief");
    if (!(t >= 0.0)) throw InputError("conditioned_belief: t must be nonnegative");
    // Shifting by the smallest rate cancels in the normalization and keeps
    // the surviving mass representable for longer.
    const double shift = chain.min_termination_rate();
    Eigen::MatrixXd generator = chain.rates();
    for (int i = 0; i < chain.modes(); ++i) {
        generator(i, i) = generator(i, i) - chain.termination_rates()(i) + shift;
    }
    const Eigen::VectorXd raw = (t * generator).exp().transpose() * q;
    const double mass = raw.sum();
    if (!(mass > kUnderflow)) {
        throw NumericalError("conditioned_belief: surviving probability mass underflowed");
    }
    // Killing removes mass, so only drift of the unkilled chain is reportable.
    return normalized(raw, "conditioned_belief", !chain.has_termination());
}

Distribution quasi_stationary_distribution(const ModeChain& chain) {
    const int m = chain.modes();
    Eigen::MatrixXd a = chain.rates();
    for (int i = 0; i < m; ++i) a(i, i) -= chain.termination_rates()(i);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a.transpose());
    const auto& values = solver.eigenvalues();
    int best = 0;
    for (int i = 1; i < m; ++i) {
        if (values(i).real() > values(best).real()) best = i;
    }
    for (int i = 0; i < m; ++i) {
        if (i != best && std::abs(values(i).real() - values(best).real()) < 1e-12) {
            throw InputError("limiting conditioned belief is not unique");
        }
    }
    Eigen::VectorXd v = solver.eigenvectors().col(best).real();
    if (v.sum() < 0.0) v = -v;
    for (int i = 0; i < m; ++i) v(i) = std::max(v(i), 0.0);
    return v / v.sum();
}

Distribution conditioned_belief_ode(const ModeChain& chain, const Distribution& q, double t,
                                    int steps) {
    require_distribution(q, chain.modes(), "conditioned_belief_ode");
    if (steps < 1) throw InputError("conditioned_belief_ode: steps must be at least 1");
    if (!(t >= 0.0)) throw InputError("conditioned_belief_ode: t must be nonnegative");
    if (t == 0.0) return q;
    const Eigen::MatrixXd& lambda = chain.rates();
    const Eigen::VectorXd& gamma = chain.termination_rates();
    auto rhs = [&](const Eigen::VectorXd& b) {
        Eigen::VectorXd d = lambda.transpose() * b;
        const double mean_gamma = b.dot(gamma);
        for (Eigen::Index i = 0; i < b.size(); ++i) d(i) += b(i) * (mean_gamma - gamma(i));
        return d;
    };
    const double dt = t / steps;
    Eigen::VectorXd b = q;
    for (int s = 0; s < steps; ++s) {
        const Eigen::VectorXd k1 = rhs(b);
        const Eigen::VectorXd k2 = rhs(b + 0.5 * dt * k1);
        const Eigen::VectorXd k3 = rhs(b + 0.5 * dt * k2);
        const Eigen::VectorXd k4 = rhs(b + dt * k3);
        b += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return b;
}

const std::vector<Slice>& CostBundle::fields(CostKind which) const {
    switch (which) {
        case CostKind::running: return running;
        case CostKind::terminal: return terminal;
        case CostKind::premature:
            if (premature.empty()) throw InputError("premature-termination costs are not defined");
            return premature;
    }
    throw InputError("unknown cost kind");
}

double expected_cost(const CostBundle& bundle, const Distribution& b, CostKind which,
                     std::size_t point) {
    const auto& fields = bundle.fields(which);
    if (static_cast<Eigen::Index>(fields.size()) != b.size()) {
        throw InputError("expected_cost: belief and cost bundle disagree on mode count");
    }
    double total = 0.0;
    for (std::size_t n = 0; n < fields.size(); ++n) total += b(n) * fields[n].at(point);
    return total;
}

void combine_slices(const Distribution& b, std::span<const Slice> slices, std::span<double> out) {
    if (static_cast<Eigen::Index>(slices.size()) != b.size()) {
        throw InputError("combine_slices: one slice per mode required");
    }
    for (const auto& s : slices) {
        if (s.size() != out.size()) throw InputError("combine_slices: slice shape mismatch");
    }
    const std::size_t n_modes = slices.size();
    for (std::size_t p = 0; p < out.size(); ++p) {
        double total = 0.0;
        bool sentinel = false;
        for (std::size_t n = 0; n < n_modes; ++n) {
            const double w = b(static_cast<Eigen::Index>(n));
            if (w == 0.0) continue;
            const double v = slices[n][p];
            if (is_sentinel(v)) sentinel = true;
            total += w * v;
        }
        out[p] = sentinel ? kInfinity : clamp_sentinel(total);
    }
}

Slice theta(std::span<const Slice> values_at_zero, const ModeChain& chain, int anchor_mode,
            double t, bool conditioned) {
    if (static_cast<int>(values_at_zero.size()) != chain.modes()) {
        throw InputError("theta: one slice per mode required");
    }
    const Distribution e = basis_belief(chain.modes(), anchor_mode);
    const Distribution b = conditioned ? conditioned_belief(chain, e, t)
                                       : propagate_belief(chain, e, t);
    Slice out(values_at_zero.front().size());
    combine_slices(b, values_at_zero, out);
    return out;
}

std::vector<ModeSwitch> sample_mode_path(const ModeChain& chain, int initial_mode, double t_end,
                                         std::uint64_t seed) {
    if (initial_mode < 0 || initial_mode >= chain.modes()) {
        throw InputError("sample_mode_path: mode index out of range");
    }
    if (!(t_end >= 0.0)) throw InputError("sample_mode_path: t_end must be nonnegative");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<ModeSwitch> path;
    double t = 0.0;
    int mode = initial_mode;
    const Eigen::MatrixXd& lambda = chain.rates();
    while (true) {
        const double rate = chain.exit_rate(mode);
        if (rate <= 0.0) break;
        t += -std::log1p(-unit(rng)) / rate;
        if (t > t_end) break;
        double pick = unit(rng) * rate;
        int next = -1;
        for (int j = 0; j < chain.modes(); ++j) {
            if (j == mode || lambda(mode, j) <= 0.0) continue;
            next = j;
            pick -= lambda(mode, j);
            if (pick < 0.0) break;
        }
        path.push_back({t, mode, next});
        mode = next;
    }
    return path;
}

}  // namespace oopdmp
