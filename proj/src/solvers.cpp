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

#include "oopdmp/solvers.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "oopdmp/diagnostics.hpp"
#include "oopdmp/eikonal.hpp"

namespace oopdmp {

const ValueLayer* SolveResult::find(int layer, int anchor) const {
    for (const auto& f : fields) {
        if (f.layer == layer && f.anchor == anchor) return &f;
    }
    return nullptr;
}

const ValueLayer& SolveResult::at(int layer, int anchor) const {
    const ValueLayer* f = find(layer, anchor);
    if (f == nullptr) {
        throw InputError("no value function for layer " + std::to_string(layer) + ", anchor " +
                         std::to_string(anchor));
    }
    return *f;
}

int SolveResult::anchor_for(const Distribution& belief) const {
    const int m = basis_index(belief);
    return m >= 0 ? m : modes;
}

void set_thread_count(int threads) {
    if (threads > 0) omp_set_num_threads(threads);
}

namespace {

int anchor_id(const Distribution& q) {
    const int m = basis_index(q);
    return m >= 0 ? m : static_cast<int>(q.size());
}

std::vector<Distribution> belief_track(const ModeChain& chain, const Distribution& q, double dt,
                                       int steps, bool conditioned) {
    std::vector<Distribution> out(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) {
        const double t = k * dt;
        out[k] = conditioned ? conditioned_belief(chain, q, t) : propagate_belief(chain, q, t);
    }
    return out;
}

std::size_t retained_count(int steps, int stride) {
    std::size_t count = static_cast<std::size_t>(steps / stride) + 1;
    if (stride > 1 && steps >= 1) ++count;             // slice 1
    if (steps % stride != 0 && steps > 1) ++count;     // slice N
    return count;
}

// Smallest stride whose storage for all fields fits the memory budget.
int choose_stride(const std::vector<int>& steps, std::size_t points, double budget_mb) {
    const double budget = budget_mb * 1024.0 * 1024.0;
    int max_steps = 1;
    for (int n : steps) max_steps = std::max(max_steps, n);
    for (int s = 1; s <= max_steps; ++s) {
        double bytes = 0.0;
        for (int n : steps) bytes += static_cast<double>(retained_count(n, s) * points) * 8.0;
        if (bytes <= budget) return s;
    }
    return max_steps;
}

void weighted_sum(const Distribution& w, const std::vector<Slice>& fields, std::span<double> out) {
    const std::size_t n_modes = fields.size();
    const std::size_t n = out.size();
#pragma omp parallel for schedule(static)
    for (std::size_t p = 0; p < n; ++p) {
        double total = 0.0;
        for (std::size_t m = 0; m < n_modes; ++m) total += w(static_cast<Eigen::Index>(m)) * fields[m][p];
        out[p] = total;
    }
}

Slice active_sentinel_mask(const Grid2D& grid, Slice values) {
    for (std::size_t p = 0; p < grid.size(); ++p) {
        if (!grid.active(p)) values[p] = kInfinity;
    }
    return values;
}

struct Sweep {
    const Problem* problem = nullptr;
    const std::vector<Distribution>* beliefs = nullptr;
    double dt = 0.0;
    int steps = 0;
    int stride = 1;
    double discount = 0.0;
    bool target = false;
    bool killing = false;
    const std::vector<Slice>* observe = nullptr;
    const Slice* observe_cost = nullptr;
};

ValueField run_sweep(const Sweep& s, const Slice& terminal) {
    const Problem& pb = *s.problem;
    const Grid2D& grid = pb.grid;
    const std::size_t n = grid.size();
    const int modes = pb.modes();
    ValueField field(n, s.steps, s.dt, s.stride);
    {
        auto last = field.slice(s.steps);
        std::copy(terminal.begin(), terminal.end(), last.begin());
    }
    if (s.steps == 0) return field;

    std::vector<std::size_t> boundary;
    std::vector<std::size_t> active;
    for (std::size_t p = 0; p < n; ++p) {
        if (grid.kind(p) == PointKind::target_boundary) boundary.push_back(p);
        if (grid.active(p)) active.push_back(p);
    }
    // On target sweeps no reachable point can cost more than K_max times the
    // remaining time plus the largest terminal or breakdown charge. Larger
    // values are sentinel data smeared by the scheme and are stored as such.
    double k_max = 0.0;
    double charge_max = 0.0;
    if (s.target) {
        for (std::size_t p : active) {
            for (int m = 0; m < modes; ++m) {
                k_max = std::max(k_max, pb.costs.running[m][p]);
                if (s.killing && pb.chain.termination_rates()(m) > 0.0 &&
                    !is_sentinel(pb.costs.premature[m][p])) {
                    charge_max = std::max(charge_max, pb.costs.premature[m][p]);
                }
            }
        }
        for (std::size_t p : boundary) {
            for (int m = 0; m < modes; ++m) charge_max = std::max(charge_max, pb.costs.terminal[m][p]);
        }
    }
    Slice current = terminal;
    double terminal_max = 0.0;
    if (s.target) {
        // Unreached points start from a large finite penalty rather than the
        // sentinel. Any reachable value stays below it, and the scheme's
        // numerical diffusion of the unreached front dies out within a few
        // steps instead of dozens.
        for (std::size_t p : active) {
            if (!is_sentinel(terminal[p])) terminal_max = std::max(terminal_max, terminal[p]);
        }
        double gamma_max = 0.0;
        if (s.killing) gamma_max = pb.chain.termination_rates().maxCoeff();
        const double span = s.steps * s.dt;
        const double penalty = (2.0 * (k_max * span + charge_max + terminal_max) + 1.0) *
                               std::exp(std::min(gamma_max * span, 20.0));
        for (std::size_t p : active) {
            if (is_sentinel(current[p])) current[p] = penalty;
        }
    }
    Slice next(n), kbar(n), rate, reward;
    if (s.killing) {
        rate.assign(n, 0.0);
        reward.assign(n, 0.0);
    }
    const Eigen::VectorXd& gamma = pb.chain.termination_rates();

    for (int k = s.steps; k >= 1; --k) {
        const Distribution& b = (*s.beliefs)[k];
        const double weight = s.discount > 0.0 ? std::exp(-s.discount * k * s.dt) : 1.0;
        weighted_sum(weight == 1.0 ? b : Distribution(b * weight), pb.costs.running, kbar);

        ZerothOrder zeroth;
        bool use_zeroth = false;
        if (s.killing) {
            const Eigen::VectorXd bg = b.cwiseProduct(gamma);
            const double r = bg.sum();
            if (r > 0.0) {
                use_zeroth = true;
                std::fill(rate.begin(), rate.end(), r);
                const auto& phi = pb.costs.premature;
#pragma omp parallel for schedule(static)
                for (std::size_t p = 0; p < n; ++p) {
                    double total = 0.0;
                    bool sentinel = false;
                    for (int m = 0; m < modes; ++m) {
                        if (bg(m) == 0.0) continue;
                        if (is_sentinel(phi[m][p])) sentinel = true;
                        total += bg(m) * phi[m][p];
                    }
                    reward[p] = sentinel ? kInfinity : total / r;
                }
                zeroth = {rate, reward};
            }
        }
        explicit_update(current, grid, pb.speed, kbar, s.dt, next, use_zeroth ? &zeroth : nullptr);

        const Distribution& b1 = (*s.beliefs)[k - 1];
        if (s.target) {
            for (std::size_t p : boundary) {
                double psi = 0.0;
                for (int m = 0; m < modes; ++m) psi += b1(m) * pb.costs.terminal[m][p];
                next[p] = std::min(next[p], psi);
            }
        }
        if (s.observe != nullptr) {
            const auto& w = *s.observe;
            const std::size_t count = active.size();
#pragma omp parallel for schedule(static)
            for (std::size_t a = 0; a < count; ++a) {
                const std::size_t p = active[a];
                double total = 0.0;
                bool sentinel = false;
                for (int m = 0; m < modes; ++m) {
                    if (b1(m) == 0.0) continue;
                    if (is_sentinel(w[m][p])) sentinel = true;
                    total += b1(m) * w[m][p];
                }
                if (sentinel) continue;
                if (s.observe_cost != nullptr) total += (*s.observe_cost)[p];
                if (total < next[p]) next[p] = total;
            }
        }
        current.swap(next);
        if (field.retains(k - 1)) {
            auto out = field.slice(k - 1);
            std::copy(current.begin(), current.end(), out.begin());
            if (s.target) {
                const double cap =
                    (k_max * (s.steps - k + 1) * s.dt + std::max(charge_max, terminal_max)) * (1.0 + 1e-9);
                for (double& v : out) {
                    if (v > cap) v = kInfinity;
                }
            }
        }
    }
    return field;
}

// Sup-norm distance over stored slices, sentinels compared as equal.
double field_distance(const ValueField& a, const ValueField& b) {
    double d = 0.0;
    for (int k : a.retained()) {
        auto sa = a.slice(k);
        auto sb = b.slice(k);
        for (std::size_t p = 0; p < sa.size(); ++p) {
            const bool ia = is_sentinel(sa[p]);
            const bool ib = is_sentinel(sb[p]);
            if (ia && ib) continue;
            d = std::max(d, std::abs(sa[p] - sb[p]));
        }
    }
    return d;
}

Slice combine(const Distribution& b, const std::vector<Slice>& slices) {
    Slice out(slices.front().size());
    combine_slices(b, slices, out);
    return out;
}

std::vector<Slice> slice_zero(const std::vector<ValueField>& fields) {
    std::vector<Slice> out;
    for (const auto& f : fields) {
        auto s = f.slice(0);
        out.emplace_back(s.begin(), s.end());
    }
    return out;
}

double require_horizon(const Problem& p) {
    if (!p.options().horizon) throw InputError("this regime needs an explicit horizon");
    return *p.options().horizon;
}

double budget(const Problem& p) { return p.options().memory_budget_mb; }

SolveResult base_result(const Problem& p) {
    SolveResult r;
    r.regime = p.options().regime;
    r.observations = p.options().observations.kind;
    r.modes = p.modes();
    r.discount = p.options().discount;
    return r;
}

bool needs_initial_anchor(const Problem& p) { return basis_index(p.initial) < 0; }

// Indefinite sweeps share the terminal condition: sentinel off the target,
// expected terminal cost on its boundary.
Slice indefinite_terminal(const Problem& p, const Distribution& b) {
    Slice out(p.grid.size(), kInfinity);
    for (std::size_t q = 0; q < out.size(); ++q) {
        if (p.grid.kind(q) != PointKind::target_boundary) continue;
        double psi = 0.0;
        for (int m = 0; m < p.modes(); ++m) psi += b(m) * p.costs.terminal[m][q];
        out[q] = psi;
    }
    return out;
}

struct IndefiniteSetup {
    double horizon;
    TimeStep ts;
    bool killing;
};

IndefiniteSetup indefinite_setup(const Problem& p, bool killing) {
    if (!p.grid.has_target()) throw InputError("indefinite regimes need a nonempty target");
    if (killing && p.costs.premature.empty()) {
        throw InputError("randomly terminated solves need premature costs");
    }
    const double horizon = indefinite_horizon(p);
    const double extra = killing ? p.chain.max_termination_rate() : 0.0;
    return {horizon, cfl_timestep(p.grid, p.speed, horizon, extra), killing};
}

class TrackCache {
public:
    TrackCache(const Problem& p, double dt, int steps, bool conditioned)
        : p_(p), dt_(dt), steps_(steps), conditioned_(conditioned) {}

    const std::vector<Distribution>& get(int anchor, const Distribution& belief) {
        auto it = cache_.find(anchor);
        if (it == cache_.end()) {
            it = cache_.emplace(anchor, belief_track(p_.chain, belief, dt_, steps_, conditioned_))
                     .first;
        }
        return it->second;
    }

private:
    const Problem& p_;
    double dt_;
    int steps_;
    bool conditioned_;
    std::map<int, std::vector<Distribution>> cache_;
};

SolveResult indefinite_none(const Problem& p, const Distribution& anchor, bool killing) {
    require_distribution(anchor, p.modes(), "anchor belief");
    const auto setup = indefinite_setup(p, killing);
    SolveResult r = base_result(p);
    r.observations = ObservationKind::none;
    r.conditioned = killing;
    r.horizon_used = setup.horizon;
    const auto beliefs = belief_track(p.chain, anchor, setup.ts.dt, setup.ts.steps, killing);
    Sweep s;
    s.problem = &p;
    s.beliefs = &beliefs;
    s.dt = setup.ts.dt;
    s.steps = setup.ts.steps;
    s.stride = choose_stride({s.steps}, p.grid.size(), budget(p));
    s.target = true;
    s.killing = killing;
    r.fields.push_back({0, anchor_id(anchor), anchor, 0.0,
                        run_sweep(s, indefinite_terminal(p, beliefs.back()))});
    return r;
}

SolveResult indefinite_bounded(const Problem& p, bool killing) {
    const int budget_count = p.options().observations.count;
    const auto setup = indefinite_setup(p, killing);
    const int m = p.modes();
    const bool with_initial = needs_initial_anchor(p);
    SolveResult r = base_result(p);
    r.observations = ObservationKind::bounded;
    r.conditioned = killing;
    r.horizon_used = setup.horizon;
    r.layers = budget_count + 1;
    const int per_layer = m + (with_initial ? 1 : 0);
    const int stride = choose_stride(
        std::vector<int>(static_cast<std::size_t>(per_layer * r.layers), setup.ts.steps),
        p.grid.size(), budget(p));
    TrackCache tracks(p, setup.ts.dt, setup.ts.steps, killing);

    std::vector<Slice> next_layer_zero;
    for (int l = budget_count; l >= 0; --l) {
        std::vector<ValueField> layer_fields;
        for (int a = 0; a < per_layer; ++a) {
            const Distribution belief = a < m ? basis_belief(m, a) : p.initial;
            const auto& beliefs = tracks.get(a, belief);
            Sweep s;
            s.problem = &p;
            s.beliefs = &beliefs;
            s.dt = setup.ts.dt;
            s.steps = setup.ts.steps;
            s.stride = stride;
            s.target = true;
            s.killing = killing;
            if (l < budget_count) s.observe = &next_layer_zero;
            ValueField f = run_sweep(s, indefinite_terminal(p, beliefs.back()));
            if (a < m) layer_fields.push_back(f);
            r.fields.push_back({l, a, belief, 0.0, std::move(f)});
        }
        next_layer_zero = slice_zero(layer_fields);
    }
    return r;
}

SolveResult indefinite_paid(const Problem& p, bool killing) {
    if (p.observation_cost.empty()) throw InputError("paid observations need a cost field");
    const auto setup = indefinite_setup(p, killing);
    const int m = p.modes();
    const bool with_initial = needs_initial_anchor(p);
    SolveResult r = base_result(p);
    r.observations = ObservationKind::paid;
    r.conditioned = killing;
    r.horizon_used = setup.horizon;
    const int stride = choose_stride(
        std::vector<int>(static_cast<std::size_t>(2 * m + 1), setup.ts.steps), p.grid.size(),
        budget(p));
    TrackCache tracks(p, setup.ts.dt, setup.ts.steps, killing);

    auto sweep_all = [&](const std::vector<Slice>* observe) {
        std::vector<ValueField> out;
        for (int a = 0; a < m; ++a) {
            const auto& beliefs = tracks.get(a, basis_belief(m, a));
            Sweep s;
            s.problem = &p;
            s.beliefs = &beliefs;
            s.dt = setup.ts.dt;
            s.steps = setup.ts.steps;
            s.stride = stride;
            s.target = true;
            s.killing = killing;
            s.observe = observe;
            s.observe_cost = observe ? &p.observation_cost : nullptr;
            out.push_back(run_sweep(s, indefinite_terminal(p, beliefs.back())));
        }
        return out;
    };

    std::vector<ValueField> current = sweep_all(nullptr);
    r.converged = false;
    for (int l = 1; l <= p.options().max_iters; ++l) {
        const std::vector<Slice> zero = slice_zero(current);
        std::vector<ValueField> next = sweep_all(&zero);
        double delta = 0.0;
        for (int a = 0; a < m; ++a) delta = std::max(delta, field_distance(next[a], current[a]));
        r.residual_history.push_back(delta);
        current = std::move(next);
        if (delta <= p.options().tol) {
            r.converged = true;
            break;
        }
    }
    r.iterations_used = static_cast<int>(r.residual_history.size());
    const std::vector<Slice> zero = slice_zero(current);
    for (int a = 0; a < m; ++a) r.fields.push_back({0, a, basis_belief(m, a), 0.0, std::move(current[a])});
    if (with_initial) {
        const auto& beliefs = tracks.get(m, p.initial);
        Sweep s;
        s.problem = &p;
        s.beliefs = &beliefs;
        s.dt = setup.ts.dt;
        s.steps = setup.ts.steps;
        s.stride = stride;
        s.target = true;
        s.killing = killing;
        s.observe = &zero;
        s.observe_cost = &p.observation_cost;
        r.fields.push_back({0, m, p.initial, 0.0, run_sweep(s, indefinite_terminal(p, beliefs.back()))});
    }
    return r;
}

void require_converged(const SolveResult& r, const char* what) {
    if (!r.converged) {
        std::ostringstream msg;
        msg << what << " did not converge within " << r.iterations_used << " iterations";
        throw ConvergenceError(msg.str(), r.residual_history);
    }
}

SolveResult infinite_periodic(const Problem& p) {
    const double period = require_horizon(p);
    const double beta = p.options().discount;
    if (!(beta > 0.0)) throw InputError("periodic observations need a positive discount rate");
    const int m = p.modes();
    const TimeStep ts = cfl_timestep(p.grid, p.speed, period, 0.0);
    SolveResult r = base_result(p);
    r.horizon_used = period;
    const bool with_initial = needs_initial_anchor(p);
    const int stride = choose_stride(std::vector<int>(static_cast<std::size_t>(2 * m + 1), ts.steps),
                                     p.grid.size(), budget(p));
    TrackCache tracks(p, ts.dt, ts.steps, false);
    const double decay = std::exp(-beta * period);

    auto sweep = [&](int a, const Distribution& belief, const Slice& terminal) {
        const auto& beliefs = tracks.get(a, belief);
        Sweep s;
        s.problem = &p;
        s.beliefs = &beliefs;
        s.dt = ts.dt;
        s.steps = ts.steps;
        s.stride = stride;
        s.discount = beta;
        return run_sweep(s, terminal);
    };
    auto observed_terminal = [&](int a, const Distribution& belief, const std::vector<Slice>& zero) {
        Slice t = combine(tracks.get(a, belief).back(), zero);
        for (double& v : t) v = is_sentinel(v) ? kInfinity : decay * v;
        return active_sentinel_mask(p.grid, std::move(t));
    };

    // Staying in place forever from the end of the first period.
    std::vector<ValueField> current;
    for (int a = 0; a < m; ++a) {
        Slice t = p.costs.running[a];
        for (double& v : t) v = decay * v / beta;
        current.push_back(sweep(a, basis_belief(m, a), active_sentinel_mask(p.grid, std::move(t))));
    }
    r.converged = false;
    for (int l = 1; l <= p.options().max_iters; ++l) {
        const std::vector<Slice> zero = slice_zero(current);
        std::vector<ValueField> next;
        for (int a = 0; a < m; ++a) {
            next.push_back(sweep(a, basis_belief(m, a), observed_terminal(a, basis_belief(m, a), zero)));
        }
        double delta = 0.0;
        for (int a = 0; a < m; ++a) delta = std::max(delta, field_distance(next[a], current[a]));
        r.residual_history.push_back(delta);
        current = std::move(next);
        if (delta <= p.options().tol) {
            r.converged = true;
            break;
        }
    }
    r.iterations_used = static_cast<int>(r.residual_history.size());
    const std::vector<Slice> zero = slice_zero(current);
    for (int a = 0; a < m; ++a) r.fields.push_back({0, a, basis_belief(m, a), 0.0, std::move(current[a])});
    if (with_initial) {
        r.fields.push_back({0, m, p.initial, 0.0, sweep(m, p.initial, observed_terminal(m, p.initial, zero))});
    }
    return r;
}

// Picks a step count making every segment an integer number of uniform steps
// when one exists close to the CFL minimum.
std::vector<TimeStep> schedule_steps(const Problem& p, const std::vector<double>& bounds) {
    const double total = bounds.back() - bounds.front();
    const TimeStep global = cfl_timestep(p.grid, p.speed, total, 0.0);
    for (int n = global.steps; n <= 4 * global.steps; ++n) {
        const double dt = total / n;
        std::vector<TimeStep> out;
        bool ok = true;
        for (std::size_t l = 0; l + 1 < bounds.size(); ++l) {
            const double len = bounds[l + 1] - bounds[l];
            const double steps = len / dt;
            const double rounded = std::round(steps);
            if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps)) {
                ok = false;
                break;
            }
            out.push_back({rounded > 0 ? len / rounded : dt, static_cast<int>(rounded)});
        }
        if (ok) return out;
    }
    std::vector<TimeStep> out;
    for (std::size_t l = 0; l + 1 < bounds.size(); ++l) {
        const double len = bounds[l + 1] - bounds[l];
        out.push_back(len > 0.0 ? cfl_timestep(p.grid, p.speed, len, 0.0) : TimeStep{global.dt, 0});
    }
    return out;
}

Slice finite_terminal(const Problem& p, const Distribution& b) {
    Slice t = combine(b, p.costs.terminal);
    return active_sentinel_mask(p.grid, std::move(t));
}

}  // namespace

double indefinite_horizon(const Problem& p) {
    if (p.options().horizon) return *p.options().horizon;
    double k_min = kInfinity;
    double k_max = 0.0;
    double psi_max = 0.0;
    for (std::size_t q = 0; q < p.grid.size(); ++q) {
        if (!p.grid.active(q)) continue;
        for (int m = 0; m < p.modes(); ++m) {
            k_min = std::min(k_min, p.costs.running[m][q]);
            k_max = std::max(k_max, p.costs.running[m][q]);
            psi_max = std::max(psi_max, p.costs.terminal[m][q]);
        }
    }
    if (!(k_min > 0.0)) {
        throw InputError("running cost vanishes somewhere; supply an explicit horizon");
    }
    return horizon_bound(solve_min_time(p.grid, p.speed), k_min, k_max, psi_max);
}

SolveResult solve_finite_no_obs(const Problem& p, const Distribution& anchor) {
    require_distribution(anchor, p.modes(), "anchor belief");
    const double horizon = require_horizon(p);
    const TimeStep ts = cfl_timestep(p.grid, p.speed, horizon, 0.0);
    SolveResult r = base_result(p);
    r.observations = ObservationKind::none;
    r.horizon_used = horizon;
    const auto beliefs = belief_track(p.chain, anchor, ts.dt, ts.steps, false);
    Sweep s;
    s.problem = &p;
    s.beliefs = &beliefs;
    s.dt = ts.dt;
    s.steps = ts.steps;
    s.stride = choose_stride({ts.steps}, p.grid.size(), budget(p));
    r.fields.push_back({0, anchor_id(anchor), anchor, 0.0,
                        run_sweep(s, finite_terminal(p, beliefs.back()))});
    return r;
}

SolveResult solve_finite_scheduled(const Problem& p) {
    const double horizon = require_horizon(p);
    const auto& times = p.options().observations.times;
    std::vector<double> bounds{0.0};
    for (double t : times) {
        if (!(t > bounds.back()) || t > horizon) {
            throw InputError("observation times must be increasing and lie in (0, horizon]");
        }
        bounds.push_back(t);
    }
    bounds.push_back(horizon);
    const int last = static_cast<int>(times.size());
    const int m = p.modes();
    const bool with_initial = needs_initial_anchor(p);
    const std::vector<TimeStep> steps = schedule_steps(p, bounds);
    SolveResult r = base_result(p);
    r.observations = ObservationKind::scheduled;
    r.horizon_used = horizon;
    r.schedule = times;
    r.layers = last + 1;
    std::vector<int> counts;
    for (int l = 0; l <= last; ++l) {
        for (int a = 0; a < m + ((l == 0 && with_initial) ? 1 : 0); ++a) counts.push_back(steps[l].steps);
    }
    const int stride = choose_stride(counts, p.grid.size(), budget(p));

    std::vector<Slice> next_zero;
    for (int l = last; l >= 0; --l) {
        std::vector<ValueField> layer_fields;
        const int anchors = m + ((l == 0 && with_initial) ? 1 : 0);
        for (int a = 0; a < anchors; ++a) {
            const Distribution belief = a < m ? basis_belief(m, a) : p.initial;
            const auto beliefs = belief_track(p.chain, belief, steps[l].dt, steps[l].steps, false);
            const Slice terminal = l == last ? finite_terminal(p, beliefs.back())
                                             : active_sentinel_mask(p.grid, combine(beliefs.back(), next_zero));
            Sweep s;
            s.problem = &p;
            s.beliefs = &beliefs;
            s.dt = steps[l].dt;
            s.steps = steps[l].steps;
            s.stride = stride;
            ValueField f = run_sweep(s, terminal);
            if (a < m) layer_fields.push_back(f);
            r.fields.push_back({l, a, belief, bounds[l], std::move(f)});
        }
        next_zero = slice_zero(layer_fields);
    }
    return r;
}

SolveResult solve_infinite_periodic(const Problem& p) {
    SolveResult r = infinite_periodic(p);
    require_converged(r, "periodic-observation solve");
    return r;
}

SolveResult solve_indefinite(const Problem& p, const Distribution& anchor) {
    return indefinite_none(p, anchor, false);
}

SolveResult solve_indefinite_bounded_obs(const Problem& p) { return indefinite_bounded(p, false); }

SolveResult solve_indefinite_paid_obs(const Problem& p) {
    SolveResult r = indefinite_paid(p, false);
    require_converged(r, "paid-observation solve");
    return r;
}

SolveResult solve_randomly_terminated(const Problem& p, const Distribution& anchor) {
    switch (p.options().observations.kind) {
        case ObservationKind::bounded: return indefinite_bounded(p, true);
        case ObservationKind::paid: {
            SolveResult r = indefinite_paid(p, true);
            require_converged(r, "paid-observation solve");
            return r;
        }
        default: return indefinite_none(p, anchor, true);
    }
}

SolveResult solve_fully_observed(const Problem& p) {
    const int m = p.modes();
    const Regime regime = p.options().regime;
    const bool killing = regime == Regime::randomly_terminated;
    const bool indefinite = regime == Regime::indefinite || killing;
    const double beta = regime == Regime::infinite_periodic ? p.options().discount : 0.0;
    if (regime == Regime::infinite_periodic && !(beta > 0.0)) {
        throw InputError("discounted problems need a positive discount rate");
    }
    if (killing && p.costs.premature.empty()) throw InputError("premature costs are required");
    const Eigen::MatrixXd& lambda = p.chain.rates();
    const Eigen::VectorXd& gamma = p.chain.termination_rates();
    const std::size_t n = p.grid.size();

    double extra = 0.0;
    std::vector<double> rates(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        rates[i] = p.chain.exit_rate(i) + beta + (killing ? gamma(i) : 0.0);
        extra = std::max(extra, rates[i]);
    }

    SolveResult r = base_result(p);
    r.fully_observed = true;
    r.observations = ObservationKind::none;

    // Explicit coupling: rate_i (reward_i - u_i) with reward_i the rate-weighted
    // mix of neighbouring modes, termination penalty and zero (discount).
    std::vector<Slice> rate_slices(static_cast<std::size_t>(m));
    std::vector<Slice> reward(static_cast<std::size_t>(m), Slice(n, 0.0));
    for (int i = 0; i < m; ++i) rate_slices[i].assign(n, rates[i]);
    auto fill_reward = [&](const std::vector<Slice>& u) {
        for (int i = 0; i < m; ++i) {
            if (rates[i] == 0.0) continue;
            for (std::size_t q = 0; q < n; ++q) {
                double total = 0.0;
                bool sentinel = false;
                for (int j = 0; j < m; ++j) {
                    if (j == i || lambda(i, j) == 0.0) continue;
                    if (is_sentinel(u[j][q])) sentinel = true;
                    total += lambda(i, j) * u[j][q];
                }
                if (killing && gamma(i) > 0.0) {
                    if (is_sentinel(p.costs.premature[i][q])) sentinel = true;
                    total += gamma(i) * p.costs.premature[i][q];
                }
                reward[i][q] = sentinel ? kInfinity : total / rates[i];
            }
        }
    };
    auto step = [&](const std::vector<Slice>& u, std::vector<Slice>& out, double dt) {
        fill_reward(u);
        for (int i = 0; i < m; ++i) {
            ZerothOrder z{rate_slices[i], reward[i]};
            explicit_update(u[i], p.grid, p.speed, p.costs.running[i], dt, out[i],
                            rates[i] > 0.0 ? &z : nullptr);
            if (indefinite) {
                for (std::size_t q = 0; q < n; ++q) {
                    if (p.grid.kind(q) == PointKind::target_boundary) {
                        out[i][q] = std::min(out[i][q], p.costs.terminal[i][q]);
                    }
                }
            }
        }
    };

    if (regime == Regime::finite) {
        const double horizon = require_horizon(p);
        const TimeStep ts = cfl_timestep(p.grid, p.speed, horizon, extra);
        r.horizon_used = horizon;
        const int stride = choose_stride(std::vector<int>(static_cast<std::size_t>(m), ts.steps), n, budget(p));
        std::vector<ValueField> fields;
        std::vector<Slice> u(static_cast<std::size_t>(m)), next(static_cast<std::size_t>(m), Slice(n));
        for (int i = 0; i < m; ++i) {
            u[i] = active_sentinel_mask(p.grid, p.costs.terminal[i]);
            fields.emplace_back(n, ts.steps, ts.dt, stride);
            auto s = fields[i].slice(ts.steps);
            std::copy(u[i].begin(), u[i].end(), s.begin());
        }
        for (int k = ts.steps; k >= 1; --k) {
            step(u, next, ts.dt);
            std::swap(u, next);
            if (fields[0].retains(k - 1)) {
                for (int i = 0; i < m; ++i) {
                    auto s = fields[i].slice(k - 1);
                    std::copy(u[i].begin(), u[i].end(), s.begin());
                }
            }
        }
        for (int i = 0; i < m; ++i) r.fields.push_back({0, i, basis_belief(m, i), 0.0, std::move(fields[i])});
        return r;
    }

    // Stationary regimes: march the time-dependent analogue to steady state.
    if (indefinite && !p.grid.has_target()) throw InputError("indefinite regimes need a target");
    const TimeStep ts = cfl_timestep(p.grid, p.speed, 1.0, extra);
    std::vector<Slice> u(static_cast<std::size_t>(m)), next(static_cast<std::size_t>(m), Slice(n));
    for (int i = 0; i < m; ++i) {
        if (indefinite) {
            u[i] = indefinite_terminal(p, basis_belief(m, i));
        } else {
            Slice stay = p.costs.running[i];
            for (double& v : stay) v /= beta;
            u[i] = active_sentinel_mask(p.grid, std::move(stay));
        }
    }
    const long cap = static_cast<long>(p.options().max_iters) * ts.steps;
    r.converged = false;
    long iterations = 0;
    while (iterations < cap) {
        step(u, next, ts.dt);
        ++iterations;
        double change = 0.0;
        for (int i = 0; i < m; ++i) {
            for (std::size_t q = 0; q < n; ++q) {
                if (is_sentinel(u[i][q]) && is_sentinel(next[i][q])) continue;
                change = std::max(change, std::abs(next[i][q] - u[i][q]));
            }
        }
        std::swap(u, next);
        // Stop on the time derivative so the distance to steady state is
        // of order tol over the slowest decay rate.
        if (change <= p.options().tol * ts.dt) {
            r.converged = true;
            r.residual_history.push_back(change);
            break;
        }
    }
    r.iterations_used = static_cast<int>(std::min<long>(iterations, std::numeric_limits<int>::max()));
    r.horizon_used = iterations * ts.dt;
    for (int i = 0; i < m; ++i) {
        ValueField f(n, 0, 0.0, 1);
        auto s = f.slice(0);
        std::copy(u[i].begin(), u[i].end(), s.begin());
        r.fields.push_back({0, i, basis_belief(m, i), 0.0, std::move(f)});
    }
    if (!r.converged) {
        throw ConvergenceError("fully observed stationary solve did not converge", r.residual_history);
    }
    return r;
}

SolveResult solve(const Problem& p) {
    const auto& o = p.options();
    if (o.fully_observed) return solve_fully_observed(p);
    switch (o.regime) {
        case Regime::finite:
            if (o.observations.kind == ObservationKind::scheduled) return solve_finite_scheduled(p);
            return solve_finite_no_obs(p, p.initial);
        case Regime::infinite_periodic: return infinite_periodic(p);
        case Regime::indefinite:
            switch (o.observations.kind) {
                case ObservationKind::bounded: return indefinite_bounded(p, false);
                case ObservationKind::paid: return indefinite_paid(p, false);
                default: return indefinite_none(p, p.initial, false);
            }
        case Regime::randomly_terminated:
            switch (o.observations.kind) {
                case ObservationKind::bounded: return indefinite_bounded(p, true);
                case ObservationKind::paid: return indefinite_paid(p, true);
                default: return indefinite_none(p, p.initial, true);
            }
    }
    throw InputError("unsupported regime");
}

Slice observation_value(const SolveResult& result, const ModeChain& chain, int layer,
                        const Distribution& anchor_belief, double t) {
    std::vector<Slice> zero;
    for (int n = 0; n < result.modes; ++n) {
        auto s = result.at(layer, n).values.slice(0);
        zero.emplace_back(s.begin(), s.end());
    }
    const Distribution b = result.conditioned ? conditioned_belief(chain, anchor_belief, t)
                                              : propagate_belief(chain, anchor_belief, t);
    return combine(b, zero);
}

Slice observation_gap(const SolveResult& result, const Problem& problem, int layer, int anchor,
                      double t) {
    int target_layer = 0;
    const bool paid = result.observations == ObservationKind::paid;
    if (result.observations == ObservationKind::bounded) {
        target_layer = layer + 1;
        if (target_layer >= result.layers) throw InputError("the last layer has no observations left");
    } else if (!paid) {
        throw InputError("observation gaps need bounded or paid observations");
    }
    const ValueLayer& f = result.at(layer, anchor);
    Slice gap = observation_value(result, problem.chain, target_layer, f.belief, t);
    for (std::size_t q = 0; q < gap.size(); ++q) {
        const double v = f.values.sample(q, t);
        if (is_sentinel(gap[q]) || is_sentinel(v)) {
            gap[q] = kInfinity;
            continue;
        }
        gap[q] = gap[q] + (paid ? problem.observation_cost[q] : 0.0) - v;
    }
    return gap;
}

}  // namespace oopdmp
