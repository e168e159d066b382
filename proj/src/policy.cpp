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

#include "oopdmp/policy.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace oopdmp {

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::mode_switch: return "mode_switch";
        case EventKind::observation: return "observation";
        case EventKind::premature_termination: return "premature_termination";
        case EventKind::goal_reached: return "goal_reached";
        case EventKind::horizon_end: return "horizon_end";
    }
    return "unknown";
}

double SimTrace::reconstructed_cost() const {
    double total = path.empty() ? 0.0 : path.back().running_cost;
    for (const auto& e : events) total += e.cost;
    return total;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 finalizer over the combined state
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

double running_cost_max(const Problem& p) {
    double k_max = 0.0;
    for (std::size_t q = 0; q < p.grid.size(); ++q) {
        if (!p.grid.active(q)) continue;
        for (const auto& k : p.costs.running) k_max = std::max(k_max, k[q]);
    }
    return k_max;
}

std::size_t nearest_point(const Grid2D& grid, Point2 x) {
    const int n = grid.subdivisions();
    const int i = std::clamp(static_cast<int>(std::lround(x[0] / grid.spacing())), 0, n);
    const int j = std::clamp(static_cast<int>(std::lround(x[1] / grid.spacing())), 0, n);
    return grid.index(i, j);
}

bool inside_unit_square(double x, double y) {
    return x >= -1e-12 && x <= 1.0 + 1e-12 && y >= -1e-12 && y <= 1.0 + 1e-12;
}

// Value samples for steering. Inside the target the field holds a sentinel, so
// when `psi` is given target corners take the expected terminal cost instead;
// this keeps the gradient pointing into the target right up to its edge.
class FieldView {
public:
    FieldView(const ValueField& f, const Problem& p, double t, const Distribution* psi)
        : f_(f), p_(p), t_(t), psi_(psi) {}

    double operator()(double x, double y) const {
        if (!inside_unit_square(x, y)) return kInfinity;
        if (psi_ == nullptr) return f_.sample(p_.grid, x, y, t_);
        const Grid2D& g = p_.grid;
        const int n = g.subdivisions();
        const double gx = std::clamp(x / g.spacing(), 0.0, static_cast<double>(n));
        const double gy = std::clamp(y / g.spacing(), 0.0, static_cast<double>(n));
        const int i0 = std::min(static_cast<int>(gx), n - 1);
        const int j0 = std::min(static_cast<int>(gy), n - 1);
        const double u = gx - i0;
        const double w = gy - j0;
        return clamp_sentinel((1 - u) * (1 - w) * corner(g.index(i0, j0)) +
                              u * (1 - w) * corner(g.index(i0 + 1, j0)) +
                              (1 - u) * w * corner(g.index(i0, j0 + 1)) +
                              u * w * corner(g.index(i0 + 1, j0 + 1)));
    }

private:
    double corner(std::size_t q) const {
        if (!p_.grid.in_target(q)) return f_.sample(q, t_);
        double psi = 0.0;
        for (int m = 0; m < psi_->size(); ++m) {
            if ((*psi_)(m) != 0.0) psi += (*psi_)(m) * p_.costs.terminal[m][q];
        }
        return psi;
    }

    const ValueField& f_;
    const Problem& p_;
    double t_;
    const Distribution* psi_;
};

// -grad v / |grad v| from one-sided samples; nullopt when degenerate. Samples
// are pulled back onto the domain edge, so the step shrinks near the boundary.
std::optional<Point2> descent(const FieldView& v, double h, Point2 x, double eps) {
    const double v0 = v(x[0], x[1]);
    Point2 g{0.0, 0.0};
    for (int axis = 0; axis < 2; ++axis) {
        Point2 plus = x;
        Point2 minus = x;
        plus[axis] = std::min(x[axis] + h, 1.0);
        minus[axis] = std::max(x[axis] - h, 0.0);
        const double hp = plus[axis] - x[axis];
        const double hm = x[axis] - minus[axis];
        const double sp = hp > 1e-3 * h ? (v(plus[0], plus[1]) - v0) / hp : 0.0;
        const double sm = hm > 1e-3 * h ? (v(minus[0], minus[1]) - v0) / hm : 0.0;
        if (std::min(sp, sm) < 0.0) g[axis] = sp < sm ? sp : -sm;
    }
    const double norm = std::hypot(g[0], g[1]);
    if (!(norm >= eps) || norm == 0.0) return std::nullopt;
    return Point2{-g[0] / norm, -g[1] / norm};
}

// Toward the 4-neighbour with the smallest value, or hold.
Point2 tie_break(const FieldView& v, double h, Point2 x) {
    const Point2 dirs[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    double best = v(x[0], x[1]);
    Point2 choice{0.0, 0.0};
    for (const auto& d : dirs) {
        const double s = v(std::clamp(x[0] + h * d[0], 0.0, 1.0), std::clamp(x[1] + h * d[1], 0.0, 1.0));
        if (s < best) {
            best = s;
            choice = d;
        }
    }
    return choice;
}

bool has_target(const Problem& p) {
    return p.spec.solve.regime == Regime::indefinite || p.spec.solve.regime == Regime::randomly_terminated;
}

double horizon_scale(const SolveResult& r) { return r.horizon_used > 0.0 ? r.horizon_used : 1.0; }

// Lazily generated exact mode path, extended chunk by chunk.
class ModeProcess {
public:
    ModeProcess(const ModeChain& chain, int mode, double chunk, std::uint64_t seed)
        : chain_(chain), mode_(mode), chunk_(chunk), seed_(seed) {}

    int mode() const { return mode_; }

    /// Switches in (t0, t1], applied in order.
    std::vector<ModeSwitch> advance(double t1) {
        std::vector<ModeSwitch> out;
        while (true) {
            while (next_ < pending_.size() && pending_[next_].time <= t1) {
                out.push_back(pending_[next_]);
                mode_ = pending_[next_].to;
                ++next_;
            }
            if (next_ < pending_.size() || generated_until_ >= t1) break;
            const int start_mode = pending_.empty() ? mode_ : pending_.back().to;
            auto path = sample_mode_path(chain_, start_mode, chunk_, derive_seed(seed_, chunks_++));
            for (auto& s : path) s.time += generated_until_;
            pending_.insert(pending_.end(), path.begin(), path.end());
            generated_until_ += chunk_;
        }
        return out;
    }

private:
    const ModeChain& chain_;
    int mode_;
    double chunk_;
    std::uint64_t seed_;
    std::uint64_t chunks_ = 1;
    double generated_until_ = 0.0;
    std::vector<ModeSwitch> pending_;
    std::size_t next_ = 0;
};

int sample_from(const Distribution& b, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double pick = unit(rng);
    int last = 0;
    for (int m = 0; m < b.size(); ++m) {
        if (b(m) <= 0.0) continue;
        last = m;
        pick -= b(m);
        if (pick < 0.0) return m;
    }
    return last;
}

int most_likely(const Distribution& b) {
    Eigen::Index m = 0;
    b.maxCoeff(&m);
    return static_cast<int>(m);
}

double expected_at(const std::vector<Slice>& fields, const Distribution& b, const Grid2D& grid,
                   Point2 x) {
    double total = 0.0;
    for (int m = 0; m < b.size(); ++m) {
        if (b(m) == 0.0) continue;
        total += b(m) * interpolate(grid, fields[m], x[0], x[1]);
    }
    return total;
}

class Tracer {
public:
    Tracer(const SolveResult& r, const Problem& p, const TraceOptions& o)
        : r_(r), p_(p), o_(o), grid_(p.grid), m_(p.modes()) {
        const double k_max = running_cost_max(p);
        eps_grad_ = 1e-9 * k_max * horizon_scale(r) / grid_.spacing();
        tau_ = grid_.spacing() / (2.0 * p.speed.max());
        indefinite_ = r.regime == Regime::indefinite || r.regime == Regime::randomly_terminated;
        killing_ = r.regime == Regime::randomly_terminated;
        discount_ = r.regime == Regime::infinite_periodic ? r.discount : 0.0;
    }

    SimTrace run(Point2 start) {
        SimTrace trace;
        trace.seed = o_.seed;
        trace.stochastic = o_.stochastic;
        std::mt19937_64 rng(derive_seed(o_.seed, 0));
        std::exponential_distribution<double> exp1(1.0);
        const double hazard_budget = exp1(rng);
        double hazard = 0.0;

        Distribution anchor_belief = p_.initial;
        int anchor = r_.fully_observed ? -1 : r_.anchor_for(p_.initial);
        int mu = o_.initial_mode ? *o_.initial_mode
                                 : (o_.stochastic ? sample_from(p_.initial, rng) : most_likely(p_.initial));
        if (r_.fully_observed) anchor = mu;
        if (r_.find(0, anchor) == nullptr && r_.fields.size() == 1) anchor = r_.fields.front().anchor;
        std::optional<ModeProcess> process;
        if (o_.stochastic) process.emplace(p_.chain, mu, horizon_scale(r_), o_.seed);

        int layer = 0;
        double t = 0.0;
        double since = 0.0;
        double survival = 1.0;
        double accrued = 0.0;
        bool armed = basis_index(anchor_belief) < 0;
        std::size_t next_scheduled = 0;
        std::size_t script = 0;
        Point2 x = start;
        const double period = r_.regime == Regime::infinite_periodic ? r_.horizon_used : 0.0;
        const double t_end = o_.t_end.value_or(period > 0.0 ? 10.0 * period : r_.horizon_used);
        const long step_cap = static_cast<long>(
            100.0 * (r_.layers + 1) * std::max(horizon_scale(r_), t_end) / tau_ + 1000.0);

        auto belief_now = [&]() -> Distribution {
            if (r_.fully_observed) return basis_belief(m_, mu);
            return killing_ ? conditioned_belief(p_.chain, anchor_belief, since)
                            : propagate_belief(p_.chain, anchor_belief, since);
        };
        auto field_time = [&](const ValueLayer& f) {
            return r_.regime == Regime::finite ? t - f.start_time : since;
        };
        auto record = [&]() {
            trace.path.push_back({t, x, layer, anchor, since, accrued});
        };
        auto observe = [&](int new_layer, double charge) {
            const Distribution b = belief_now();
            int seen = mu;
            if (!o_.stochastic) {
                seen = script < o_.scripted_modes.size() ? o_.scripted_modes[script++] : most_likely(b);
                if (seen < 0 || seen >= m_) throw InputError("scripted observation mode out of range");
                mu = seen;
            }
            trace.events.push_back({EventKind::observation, t, -1, seen, survival * charge});
            ++trace.observations;
            layer = new_layer;
            anchor = seen;
            anchor_belief = basis_belief(m_, seen);
            since = 0.0;
            armed = false;
            record();
        };
        // Gap between the observation branch and the current value.
        auto observation_gap = [&](int target_layer, double charge) {
            const ValueLayer& f = r_.at(layer, anchor);
            const Distribution b = belief_now();
            const double v = view(f, field_time(f), b)(x[0], x[1]);
            double theta = charge;
            for (int n = 0; n < m_; ++n) {
                if (b(n) == 0.0) continue;
                const Distribution e = basis_belief(m_, n);
                theta += b(n) * view(r_.at(target_layer, n), 0.0, e)(x[0], x[1]);
            }
            return theta - v;
        };

        record();
        long steps = 0;
        while (true) {
            if (++steps > step_cap) throw DivergenceError("trajectory exceeded the step budget");
            const Distribution b = belief_now();
            if (indefinite_ && grid_.in_target(nearest_point(grid_, x))) {
                const double psi = o_.stochastic ? interpolate(grid_, p_.costs.terminal[mu], x[0], x[1])
                                                 : expected_at(p_.costs.terminal, b, grid_, x);
                trace.events.push_back({EventKind::goal_reached, t, -1, mu, survival * psi});
                trace.reached_target = true;
                break;
            }
            if (r_.regime == Regime::finite && t >= r_.horizon_used - 1e-12) {
                const double psi = o_.stochastic ? interpolate(grid_, p_.costs.terminal[mu], x[0], x[1])
                                                 : expected_at(p_.costs.terminal, b, grid_, x);
                trace.events.push_back({EventKind::horizon_end, t, -1, mu, psi});
                break;
            }
            if (r_.regime == Regime::infinite_periodic && t >= t_end - 1e-12) {
                trace.events.push_back({EventKind::horizon_end, t, -1, mu, 0.0});
                break;
            }
            if (indefinite_ && since > r_.horizon_used + 1e-9) {
                throw DivergenceError("trajectory exceeded the solved horizon without reaching the target");
            }

            if (!r_.fully_observed) {
                switch (r_.observations) {
                    case ObservationKind::scheduled:
                        while (next_scheduled < r_.schedule.size() &&
                               t >= r_.schedule[next_scheduled] - 1e-12) {
                            observe(static_cast<int>(next_scheduled) + 1, 0.0);
                            ++next_scheduled;
                        }
                        break;
                    case ObservationKind::bounded:
                        if (!o_.suppress_observations && layer + 1 < r_.layers) {
                            const double gap = observation_gap(layer + 1, 0.0);
                            const double eps = switch_slack(x);
                            if (gap > 1.5 * eps) armed = true;
                            if (armed && gap <= eps) observe(layer + 1, 0.0);
                        }
                        break;
                    case ObservationKind::paid:
                        if (!o_.suppress_observations) {
                            const double c = interpolate(grid_, p_.observation_cost, x[0], x[1]);
                            const double gap = observation_gap(0, c);
                            // Right after an observation the gap is exactly c, so the
                            // slack stays below it.
                            const double eps = std::min(switch_slack(x), 0.5 * c);
                            if (gap > 1.5 * eps) armed = true;
                            if (armed && gap <= eps) observe(0, c);
                        }
                        break;
                    case ObservationKind::none:
                        if (period > 0.0 && since >= period - 1e-12) observe(0, 0.0);
                        break;
                }
            }

            double dt = tau_;
            if (r_.regime == Regime::finite) {
                dt = std::min(dt, r_.horizon_used - t);
                if (next_scheduled < r_.schedule.size()) dt = std::min(dt, r_.schedule[next_scheduled] - t);
            }
            if (period > 0.0) dt = std::min({dt, period - since, t_end - t});
            dt = std::max(dt, 0.0);

            const ValueLayer& f = r_.at(layer, anchor);
            const double ft = field_time(f);
            const FieldView v = view(f, ft, b);
            Point2 dir;
            if (auto d = descent(v, grid_.spacing(), x, eps_grad_)) {
                dir = *d;
            } else {
                dir = tie_break(v, grid_.spacing(), x);
            }
            const double speed = interpolate(grid_, p_.speed.values(), x[0], x[1]);
            Point2 next{std::clamp(x[0] + dt * speed * dir[0], 0.0, 1.0),
                        std::clamp(x[1] + dt * speed * dir[1], 0.0, 1.0)};
            if (grid_.kind(nearest_point(grid_, next)) == PointKind::obstacle) next = x;

            const double weight = discount_ > 0.0 ? std::exp(-discount_ * t) : 1.0;
            if (o_.stochastic) {
                const double t0 = t;
                double s = t;
                const double t1 = t + dt;
                const auto switches = process->advance(t1);
                std::size_t i = 0;
                bool stop = false;
                while (!stop) {
                    const double seg_end = i < switches.size() ? switches[i].time : t1;
                    const double len = seg_end - s;
                    const double gamma = killing_ ? p_.chain.termination_rates()(mu) : 0.0;
                    double used = len;
                    if (gamma > 0.0 && hazard + gamma * len >= hazard_budget) {
                        used = (hazard_budget - hazard) / gamma;
                        stop = true;
                    }
                    accrued += weight * interpolate(grid_, p_.costs.running[mu], x[0], x[1]) * used;
                    hazard += gamma * used;
                    if (stop) {
                        t = s + used;
                        since += t - t0;
                        const double phi = interpolate(grid_, p_.costs.premature[mu], x[0], x[1]);
                        trace.events.push_back({EventKind::premature_termination, t, -1, mu, phi});
                        trace.terminated = true;
                        break;
                    }
                    if (i >= switches.size()) break;
                    trace.events.push_back({EventKind::mode_switch, switches[i].time, switches[i].from,
                                            switches[i].to, 0.0});
                    mu = switches[i].to;
                    if (r_.fully_observed) anchor = mu;
                    s = seg_end;
                    ++i;
                }
                if (trace.terminated) {
                    record();
                    break;
                }
            } else {
                accrued += survival * weight * expected_at(p_.costs.running, b, grid_, x) * dt;
                if (killing_) {
                    const Eigen::VectorXd bg = b.cwiseProduct(p_.chain.termination_rates());
                    const double rate = bg.sum();
                    if (rate > 0.0) {
                        accrued += survival * expected_at(p_.costs.premature, bg, grid_, x) * dt;
                        survival *= std::exp(-rate * dt);
                    }
                }
            }
            x = next;
            t += dt;
            since += dt;
            record();
        }
        trace.realized_cost = trace.reconstructed_cost();
        return trace;
    }

private:
    // Trigger slack 2h min_m K_m at the nearest gridpoint. Inside the contact
    // set the interpolated gap vanishes exactly, so the slack only has to
    // cover time and belief interpolation; a peak cost here would fire far
    // ahead of the contact set.
    double switch_slack(Point2 x) const {
        const std::size_t q = nearest_point(grid_, x);
        double k = kInfinity;
        for (const auto& running : p_.costs.running) k = std::min(k, running[q]);
        return 2.0 * grid_.spacing() * k;
    }

    FieldView view(const ValueLayer& f, double t, const Distribution& b) const {
        return FieldView(f.values, p_, t, indefinite_ ? &b : nullptr);
    }

    const SolveResult& r_;
    const Problem& p_;
    const TraceOptions& o_;
    const Grid2D& grid_;
    int m_;
    double eps_grad_ = 0.0;
    double tau_ = 0.0;
    bool indefinite_ = false;
    bool killing_ = false;
    double discount_ = 0.0;
};

}  // namespace

Point2 policy_direction(const SolveResult& result, const Problem& problem, int layer, int anchor,
                        Point2 position, double t) {
    const ValueLayer& f = result.at(layer, anchor);
    const double eps = 1e-9 * running_cost_max(problem) * horizon_scale(result) /
                       problem.grid.spacing();
    Distribution b = problem.initial;
    if (anchor >= 0 && anchor < problem.modes()) b = basis_belief(problem.modes(), anchor);
    if (has_target(problem)) {
        b = problem.spec.solve.regime == Regime::randomly_terminated
                ? conditioned_belief(problem.chain, b, t)
                : propagate_belief(problem.chain, b, t);
    }
    const FieldView v(f.values, problem, t, has_target(problem) ? &b : nullptr);
    auto d = descent(v, problem.grid.spacing(), position, eps);
    if (!d) throw DegenerateGradient("gradient vanishes at the query point");
    return *d;
}

SimTrace trace_trajectory(const SolveResult& result, const Problem& problem, Point2 start,
                          const TraceOptions& options) {
    if (!inside_unit_square(start[0], start[1])) throw InputError("start lies outside the domain");
    if (problem.grid.kind(nearest_point(problem.grid, start)) == PointKind::obstacle) {
        throw InputError("start lies inside an obstacle");
    }
    Tracer tracer(result, problem, options);
    return tracer.run(start);
}

McSummary mc_evaluate(const SolveResult& result, const Problem& problem, Point2 start, int n_runs,
                      std::uint64_t seed) {
    if (n_runs < 1) throw InputError("n_runs must be at least 1");
    std::vector<double> costs(static_cast<std::size_t>(n_runs), 0.0);
    std::vector<std::uint8_t> ok(static_cast<std::size_t>(n_runs), 0);
#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < n_runs; ++i) {
        TraceOptions o;
        o.stochastic = true;
        o.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        try {
            costs[i] = trace_trajectory(result, problem, start, o).realized_cost;
            ok[i] = 1;
        } catch (const DivergenceError&) {
            ok[i] = 0;
        }
    }
    McSummary s;
    double sum = 0.0;
    for (int i = 0; i < n_runs; ++i) {
        if (!ok[i]) {
            ++s.diverged;
            continue;
        }
        sum += costs[i];
        ++s.runs;
    }
    if (s.runs == 0) return s;
    s.mean = sum / s.runs;
    double ss = 0.0;
    for (int i = 0; i < n_runs; ++i) {
        if (ok[i]) ss += (costs[i] - s.mean) * (costs[i] - s.mean);
    }
    s.std_error = s.runs > 1 ? std::sqrt(ss / (s.runs - 1) / s.runs) : 0.0;
    return s;
}

double value_at(const SolveResult& result, const Problem& problem, Point2 position, double t) {
    if (result.fully_observed) {
        double total = 0.0;
        for (int m = 0; m < result.modes; ++m) {
            if (problem.initial(m) == 0.0) continue;
            total += problem.initial(m) *
                     result.at(0, m).values.sample(problem.grid, position[0], position[1], t);
        }
        return total;
    }
    int anchor = result.anchor_for(problem.initial);
    if (result.find(0, anchor) == nullptr && result.fields.size() == 1) anchor = result.fields.front().anchor;
    return result.at(0, anchor).values.sample(problem.grid, position[0], position[1], t);
}

}  // namespace oopdmp
