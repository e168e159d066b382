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

#include "doctest.h"

#include <cmath>

#include "oopdmp/eikonal.hpp"
#include "oopdmp/policy.hpp"
#include "oopdmp/solvers.hpp"
#include "support/fixtures.hpp"

using namespace oopdmp;

namespace {

// Finite-horizon result on an open square whose stored slices are replaced by g.
template <class G>
SolveResult synthetic(const Problem& p, G g) {
    SolveResult r = solve_finite_no_obs(p, basis_belief(1, 0));
    ValueField& f = r.fields.front().values;
    for (int k : f.retained()) {
        auto s = f.slice(k);
        for (int j = 0; j < p.grid.side(); ++j) {
            for (int i = 0; i < p.grid.side(); ++i) s[p.grid.index(i, j)] = g(p.grid.coord(i), p.grid.coord(j));
        }
    }
    return r;
}

double path_length(const SimTrace& t) {
    double total = 0.0;
    for (std::size_t i = 1; i < t.path.size(); ++i) {
        total += std::hypot(t.path[i].position[0] - t.path[i - 1].position[0],
                            t.path[i].position[1] - t.path[i - 1].position[1]);
    }
    return total;
}

// Cheap near the start, dearer towards the target.
FieldSpec bump_cost() {
    FieldSpec f;
    f.kind = FieldKind::gaussian_sum;
    f.value = 0.01;
    GaussianTerm t;
    t.amplitude = 0.05;
    t.center = {1.0, 1.0};
    t.sigma = 0.4;
    f.terms = {t};
    return f;
}

void check_trace_invariants(const SimTrace& t) {
    for (std::size_t i = 1; i < t.events.size(); ++i) CHECK(t.events[i].time >= t.events[i - 1].time);
    for (std::size_t i = 1; i < t.path.size(); ++i) CHECK(t.path[i].time >= t.path[i - 1].time);
    double charges = 0.0;
    for (const auto& e : t.events) charges += e.cost;
    CHECK(std::abs(t.realized_cost - (t.path.back().running_cost + charges)) <= 1e-9);
    CHECK(std::abs(t.realized_cost - t.reconstructed_cost()) <= 1e-9);
}

}  // namespace

TEST_CASE("policy direction on analytic fields") {
    const Problem p = build_problem(fixture::open_square(40, Regime::finite, 1.0));
    const SolveResult linear = synthetic(p, [](double x, double) { return x; });
    const Point2 d = policy_direction(linear, p, 0, 0, {0.43, 0.61}, 0.0);
    CHECK(d[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(d[1]) <= 1e-12);

    const Point2 goal{0.7, 0.3};
    const SolveResult cone =
        synthetic(p, [&](double x, double y) { return std::hypot(x - goal[0], y - goal[1]); });
    const double pi = std::acos(-1.0);
    for (Point2 q : {Point2{0.1, 0.1}, Point2{0.2, 0.9}, Point2{0.95, 0.95}, Point2{0.33, 0.47}}) {
        const Point2 a = policy_direction(cone, p, 0, 0, q, 0.0);
        const double ex = goal[0] - q[0];
        const double ey = goal[1] - q[1];
        const double cosine = (a[0] * ex + a[1] * ey) / std::hypot(ex, ey);
        CHECK(std::acos(std::min(1.0, cosine)) <= 5.0 * pi / 180.0);
    }

    const SolveResult bowl =
        synthetic(p, [](double x, double y) { return (x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5); });
    CHECK_THROWS_AS(policy_direction(bowl, p, 0, 0, {0.5, 0.5}, 0.0), DegenerateGradient);
}

TEST_CASE("time-optimal path is straight") {
    const Problem p = fixture::problem("single_mode.json", 100);
    const SolveResult r = solve(p);
    const Point2 start{0.2, 0.2};
    const SimTrace t = trace_trajectory(r, p, start);
    REQUIRE(t.reached_target);
    const double straight = std::hypot(0.8 - 0.2, 0.8 - 0.2) - 0.1;
    CHECK(std::abs(path_length(t) - straight) <= 0.03 * straight);
    check_trace_invariants(t);
    CHECK(t.realized_cost >= value_at(r, p, start) - 10 * p.grid.spacing());
    CHECK(std::abs(t.realized_cost - value_at(r, p, start)) <= 5 * p.grid.spacing());
}

TEST_CASE("deterministic Monte Carlo has zero spread") {
    const Problem p = fixture::problem("single_mode.json", 50);
    const SolveResult r = solve(p);
    const Point2 start{0.3, 0.2};
    const McSummary mc = mc_evaluate(r, p, start, 20, 3);
    CHECK(mc.runs == 20);
    CHECK(mc.diverged == 0);
    CHECK(mc.std_error <= 1e-12);
    const ArrivalField z = solve_min_time(p.grid, p.speed);
    const double z0 = z.values[p.grid.index(15, 10)];
    CHECK(std::abs(mc.mean - z0) <= 5 * p.grid.spacing());
    CHECK_THROWS_AS(mc_evaluate(r, p, start, 0, 3), InputError);
}

TEST_CASE("stochastic traces are reproducible and self-consistent") {
    const Problem p = fixture::problem("two_mode.json");
    const SolveResult r = solve(p);
    TraceOptions o;
    o.stochastic = true;
    o.seed = 99;
    const SimTrace a = trace_trajectory(r, p, *p.spec.start, o);
    const SimTrace b = trace_trajectory(r, p, *p.spec.start, o);
    CHECK(a.realized_cost == b.realized_cost);
    REQUIRE(a.path.size() == b.path.size());
    for (std::size_t i = 0; i < a.path.size(); ++i) {
        CHECK(a.path[i].position == b.path[i].position);
        CHECK(a.path[i].time == b.path[i].time);
    }
    REQUIRE(a.events.size() == b.events.size());
    check_trace_invariants(a);
    o.seed = 100;
    const SimTrace c = trace_trajectory(r, p, *p.spec.start, o);
    check_trace_invariants(c);
    CHECK(c.events.back().kind == EventKind::horizon_end);
}

TEST_CASE("two-mode Monte Carlo agrees with the value") {
    const Problem p = fixture::problem("two_mode.json");
    const SolveResult r = solve(p);
    const McSummary mc = mc_evaluate(r, p, *p.spec.start, 2000, 11);
    const double v = value_at(r, p, *p.spec.start);
    MESSAGE("mc " << mc.mean << " +- " << mc.std_error << " vs " << v);
    CHECK(mc.diverged == 0);
    CHECK(std::abs(mc.mean - v) <= 3 * mc.std_error + 5 * p.grid.spacing());
}

TEST_CASE("bounded traces respect the observation budget") {
    const Problem p = fixture::problem("barriers.json", 50);
    const SolveResult r = solve(p);
    REQUIRE(r.observations == ObservationKind::bounded);
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        TraceOptions o;
        o.stochastic = true;
        o.seed = seed;
        const SimTrace t = trace_trajectory(r, p, *p.spec.start, o);
        check_trace_invariants(t);
        CHECK(t.observations <= r.layers - 1);
        for (std::size_t i = 0; i < t.path.size(); ++i) {
            CHECK(t.path[i].layer <= r.layers - 1);
            if (i > 0 && t.path[i].layer > t.path[i - 1].layer) {
                // An observation happened: the anchor is a basis mode and the clock restarted.
                CHECK(t.path[i].anchor < p.modes());
            }
        }
        for (const auto& e : t.events) {
            if (e.kind != EventKind::observation) continue;
            bool reset = false;
            for (const auto& q : t.path) reset = reset || (q.time == e.time && q.since_observation == 0.0);
            CHECK(reset);
        }
    }
    TraceOptions quiet;
    quiet.suppress_observations = true;
    CHECK(trace_trajectory(r, p, *p.spec.start, quiet).observations == 0);
}

TEST_CASE("paid traces debit the observation cost") {
    ScenarioSpec s = fixture::load("barriers.json", 50);
    s.solve.observations.kind = ObservationKind::paid;
    s.solve.observations.cost = bump_cost();
    const Problem p = build_problem(s);
    const SolveResult r = solve(p);
    REQUIRE(r.observations == ObservationKind::paid);
    int observed = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        TraceOptions o;
        o.stochastic = true;
        o.seed = seed;
        SimTrace t;
        try {
            t = trace_trajectory(r, p, *p.spec.start, o);
        } catch (const DivergenceError&) {
            continue;
        }
        check_trace_invariants(t);
        for (const auto& e : t.events) {
            if (e.kind != EventKind::observation) continue;
            ++observed;
            const TracePoint* at = nullptr;
            for (const auto& q : t.path) {
                if (q.time == e.time) {
                    at = &q;
                    break;
                }
            }
            REQUIRE(at != nullptr);
            const double h = p.grid.spacing();
            // Bilinear interpolation of the sampled cost at the event position.
            const double x = at->position[0] / h;
            const double y = at->position[1] / h;
            const int i = std::min(static_cast<int>(x), p.grid.subdivisions() - 1);
            const int j = std::min(static_cast<int>(y), p.grid.subdivisions() - 1);
            const double u = x - i;
            const double w = y - j;
            const auto& c = p.observation_cost;
            const double expected = (1 - u) * (1 - w) * c[p.grid.index(i, j)] + u * (1 - w) * c[p.grid.index(i + 1, j)] +
                                    (1 - u) * w * c[p.grid.index(i, j + 1)] + u * w * c[p.grid.index(i + 1, j + 1)];
            CHECK(e.cost == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    CHECK(observed > 0);
}

TEST_CASE("scheduled traces switch layers at the scheduled times") {
    const Problem p = fixture::problem("rotating_finite.json", 40);
    const SolveResult r = solve(p);
    TraceOptions o;
    o.scripted_modes = {1, 2, 3};
    const SimTrace t = trace_trajectory(r, p, *p.spec.start, o);
    check_trace_invariants(t);
    std::vector<double> times;
    std::vector<int> modes;
    for (const auto& e : t.events) {
        if (e.kind == EventKind::observation) {
            times.push_back(e.time);
            modes.push_back(e.mode);
        }
    }
    REQUIRE(times.size() == 3u);
    for (int i = 0; i < 3; ++i) CHECK(times[i] == doctest::Approx(i + 1.0).epsilon(1e-12));
    CHECK(modes == std::vector<int>{1, 2, 3});
    CHECK(t.path.back().layer == 3);
    CHECK(t.path.back().time == doctest::Approx(4.0));
    o.scripted_modes = {7};
    CHECK_THROWS_AS(trace_trajectory(r, p, *p.spec.start, o), InputError);
}

TEST_CASE("invalid starts") {
    const Problem p = fixture::problem("barriers.json", 20);
    const SolveResult r = solve_indefinite(p, basis_belief(2, 0));
    CHECK_THROWS_AS(trace_trajectory(r, p, {1.5, 0.5}), InputError);
}
