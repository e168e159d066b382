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

// Acceptance runner: one PASS/FAIL line per criterion at pinned tolerances.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oopdmp/eikonal.hpp"
#include "oopdmp/policy.hpp"
#include "oopdmp/solvers.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace oopdmp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects named checks for one criterion; the criterion passes when all do.
struct Report {
    bool pass = true;
    std::ostringstream notes;

    void check(bool ok, const std::string& what) {
        if (!ok) pass = false;
        notes << "\n    [" << (ok ? "ok" : "FAILED") << "] " << what;
    }
};

std::string fmt(double x, int digits = 6) {
    std::ostringstream s;
    s.precision(digits);
    s << x;
    return s.str();
}

Slice slice0(const SolveResult& r, int layer, int anchor) {
    auto s = r.at(layer, anchor).values.slice(0);
    return Slice(s.begin(), s.end());
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p) {
        if (is_sentinel(a[p]) && is_sentinel(b[p])) continue;
        d = std::max(d, std::abs(a[p] - b[p]));
    }
    return d;
}

bool nonincreasing(const std::vector<double>& r) {
    for (std::size_t i = 1; i < r.size(); ++i) {
        if (r[i] > r[i - 1]) return false;
    }
    return true;
}

Grid2D disk_grid(int j, Point2 c, double r) {
    const std::size_t n = static_cast<std::size_t>((j + 1) * (j + 1));
    std::vector<std::uint8_t> target(n, 0);
    for (int b = 0; b <= j; ++b) {
        for (int a = 0; a <= j; ++a) {
            target[static_cast<std::size_t>(b * (j + 1) + a)] =
                std::hypot(double(a) / j - c[0], double(b) / j - c[1]) <= r;
        }
    }
    return Grid2D(j, std::vector<std::uint8_t>(n, 0), target);
}

// Mars paid-observation solve, shared by criteria 4, 7 and 9.
const SolveResult& mars_paid(const Problem& p) {
    static const SolveResult r = solve(p);
    return r;
}

const Problem& mars_problem() {
    static const Problem p = fixture::problem("mars.json");
    return p;
}

// Position along the trace at time t (last recorded point not after t).
Point2 position_at(const SimTrace& trace, double t) {
    Point2 at = trace.path.front().position;
    for (const auto& q : trace.path) {
        if (q.time > t + 1e-12) break;
        at = q.position;
    }
    return at;
}

void stationary_distributions(Report& rep) {
    const Problem rot = fixture::problem("rotating_finite.json", 10);
    const Problem maze = fixture::problem("maze.json", 10);
    const Distribution want_rot = Distribution::Constant(4, 0.25);
    Distribution want_maze(10);
    want_maze << 1.0 / 16, 1.0 / 8, 1.0 / 8, 1.0 / 8, 1.0 / 8, 1.0 / 8, 1.0 / 16, 1.0 / 16, 1.0 / 8, 1.0 / 16;
    for (const auto& [name, chain, want] :
         {std::tuple{"4-mode", &rot.chain, want_rot}, std::tuple{"10-mode maze", &maze.chain, want_maze}}) {
        stationary_distribution(*chain);
        const auto t0 = Clock::now();
        const Distribution q = stationary_distribution(*chain);
        const double ms = 1e3 * seconds_since(t0);
        const double err = (q - want).cwiseAbs().maxCoeff();
        const double residual = (q.transpose() * chain->rates()).cwiseAbs().maxCoeff();
        rep.check(err < 1e-12, std::string(name) + " max error " + fmt(err));
        rep.check(residual <= 1e-10, std::string(name) + " residual " + fmt(residual));
        rep.check(ms < 1.0, std::string(name) + " runtime " + fmt(ms, 3) + " ms");
    }
}

void conditioned_limit(Report& rep) {
    const ModeChain& chain = mars_problem().chain;
    Distribution q(2);
    q << 1.0, 0.0;
    const Distribution b = conditioned_belief(chain, q, 10.0);
    const double err = std::max(std::abs(b(0) - 0.5587), std::abs(b(1) - 0.4413));
    rep.check(err <= 1e-3, "belief at t=10 [" + fmt(b(0)) + ", " + fmt(b(1)) + "] vs [0.5587, 0.4413]");
    double worst = 0.0;
    for (int i = 0; i <= 50; ++i) {
        const double t = 0.1 * i;
        const Eigen::VectorXd rk = oracle::rk4_conditioned(chain.rates(), chain.termination_rates(), q, t, 4000);
        worst = std::max(worst, (conditioned_belief(chain, q, t) - rk).cwiseAbs().maxCoeff());
    }
    rep.check(worst <= 1e-6, "closed form vs RK4 on [0,5]: " + fmt(worst));
}

void horizon_bounds(Report& rep) {
    for (const auto& [file, want] : {std::pair{"barriers.json", 14.83}, std::pair{"maze.json", 37.68}}) {
        for (int j : {100, 200}) {
            const Problem p = fixture::problem(file, j);
            const auto t0 = Clock::now();
            const double bound = indefinite_horizon(p);
            const double secs = seconds_since(t0);
            const double rel = std::abs(bound - want) / want;
            rep.check(rel <= 0.05, std::string(file) + " J=" + std::to_string(j) + " bound " + fmt(bound) +
                                       " vs " + fmt(want) + " (" + fmt(100 * rel, 3) + "%)");
            if (j == 200) rep.check(secs < 10.0, "runtime at J=200 " + fmt(secs, 3) + " s");
        }
    }
    // Formula check on a synthetic instance with known cost extremes.
    ScenarioSpec s = fixture::open_square(100, Regime::indefinite, 1.0);
    s.solve.horizon.reset();
    ModeSpec a;
    a.cost = FieldSpec::constant(1.5);
    a.terminal = FieldSpec::constant(3.0);
    ModeSpec b;
    b.cost = FieldSpec::constant(6.0);
    b.terminal = FieldSpec::constant(0.5);
    s.modes = {a, b};
    s.rates = {{-5, 5}, {0, 0}};
    s.speed = FieldSpec::constant(0.5);
    ShapeSpec disk;
    disk.kind = ShapeKind::circle;
    disk.lower = {0.12, 0.8};
    disk.radius = 0.04;
    s.target = {disk};
    const Problem p = build_problem(s);
    // Farthest point is the corner (1, 0); travel time at speed 0.5.
    const double zmax = (std::hypot(1.0 - 0.12, 0.8) - 0.04) / 0.5;
    const double hand = zmax * 6.0 / 1.5 + 3.0 / 1.5;
    const double bound = indefinite_horizon(p);
    rep.check(std::abs(bound - hand) <= 4.0 * 2 * p.grid.spacing() / 0.5,
              "synthetic bound " + fmt(bound) + " vs hand-computed " + fmt(hand));
    const double mars = indefinite_horizon(mars_problem());
    rep.notes << "\n    [info] Mars bound " << fmt(mars) << " on the stand-in terrain; the 5.46 target is checked through the formula only";
}

void iteration_counts(Report& rep) {
    for (const auto& [file, lo, hi] :
         {std::tuple{"rotating_periodic_beta05.json", 14, 24}, std::tuple{"rotating_periodic_beta6.json", 0, 3}}) {
        const Problem p = fixture::problem(file);
        const SolveResult r = solve(p);
        rep.check(r.converged && r.iterations_used >= lo && r.iterations_used <= hi,
                  std::string(file) + " iterations " + std::to_string(r.iterations_used) + " in [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
        rep.check(nonincreasing(r.residual_history), std::string(file) + " residuals nonincreasing");
    }
    const SolveResult& m = mars_paid(mars_problem());
    rep.check(m.converged && m.iterations_used >= 8 && m.iterations_used <= 18,
              "mars paid iterations " + std::to_string(m.iterations_used) + " in [8, 18]");
    rep.check(nonincreasing(m.residual_history), "mars paid residuals nonincreasing");
}

void eikonal_convergence(Report& rep) {
    const auto t0 = Clock::now();
    auto error = [](int j) {
        const Grid2D g = disk_grid(j, {0.5, 0.5}, 0.1);
        const ArrivalField z = solve_min_time(g, SpeedField(g, Slice(g.size(), 1.0)));
        double err = 0.0;
        for (int b = 0; b <= j; ++b) {
            for (int a = 0; a <= j; ++a) {
                const double exact = std::max(0.0, std::hypot(g.coord(a) - 0.5, g.coord(b) - 0.5) - 0.1);
                err = std::max(err, std::abs(z.values[g.index(a, b)] - exact));
            }
        }
        return err;
    };
    double prev = error(50);
    for (int j : {100, 200, 400}) {
        const double e = error(j);
        const double order = std::log2(prev / e);
        rep.check(std::abs(order - 1.0) <= 0.4, "observed order at J=" + std::to_string(j) + ": " + fmt(order, 3));
        prev = e;
    }
    const Grid2D g = disk_grid(50, {0.3, 0.6}, 0.08);
    Slice speed(g.size());
    for (int b = 0; b <= 50; ++b) {
        for (int a = 0; a <= 50; ++a) {
            const double x = g.coord(a);
            const double y = g.coord(b);
            speed[g.index(a, b)] = 1.0 + 0.4 * std::sin(5 * x) * std::cos(3 * y) + 0.3 * x * y;
        }
    }
    const ArrivalField z = solve_min_time(g, SpeedField(g, speed));
    const std::vector<double> d = oracle::dijkstra8(g, speed);
    const double worst = max_abs_diff(z.values, d);
    rep.check(worst <= 3.0 * g.spacing(), "Dijkstra gap " + fmt(worst) + " <= 3h = " + fmt(3 * g.spacing()));
    const double secs = seconds_since(t0);
    rep.check(secs < 10.0, "runtime " + fmt(secs, 3) + " s");
}

void oracle_equivalence(Report& rep) {
    const Problem p = fixture::problem("two_mode.json", 10);
    const SolveResult r = solve(p);
    oracle::DpProblem d{&p.grid, p.costs.running, p.costs.terminal, p.speed.values(), p.chain.rates(),
                        p.initial, 1.0};
    const double dp = max_abs_diff(slice0(r, 0, 0), oracle::dp_belief_finite(d));
    rep.check(dp <= 5.0 * p.grid.spacing(), "two-mode vs DP " + fmt(dp) + " <= 5h = " + fmt(5 * p.grid.spacing()));

    ScenarioSpec one = fixture::load("two_mode.json", 10);
    one.modes = {one.modes[1]};
    one.rates = {{0}};
    const Problem single = build_problem(one);
    const double m1 = max_abs_diff(slice0(solve_finite_no_obs(single, basis_belief(1, 0)), 0, 0),
                                   slice0(solve_fully_observed(single), 0, 0));
    rep.check(m1 <= 1e-12, "M=1 belief vs single-mode solver " + fmt(m1));

    ScenarioSpec frozen = fixture::load("two_mode.json", 10);
    frozen.rates = {{0, 0}, {0, 0}};
    const SolveResult full = solve_fully_observed(build_problem(frozen));
    double worst = 0.0;
    for (int m = 0; m < 2; ++m) {
        ScenarioSpec alone = frozen;
        alone.modes = {frozen.modes[m]};
        alone.rates = {{0}};
        const SolveResult a = solve_finite_no_obs(build_problem(alone), basis_belief(1, 0));
        worst = std::max(worst, max_abs_diff(slice0(full, 0, m), slice0(a, 0, 0)));
    }
    rep.check(worst == 0.0, "fully observed with frozen chain decouples, max diff " + fmt(worst));
}

void dominance_feasibility(Report& rep) {
    ScenarioSpec s = fixture::load("maze.json", 100);
    std::vector<SolveResult> results;
    for (int count : {0, 1, 2}) {
        s.solve.observations.kind = count == 0 ? ObservationKind::none : ObservationKind::bounded;
        s.solve.observations.count = count;
        results.push_back(solve(build_problem(s)));
    }
    const Problem p = build_problem(s);
    const Grid2D& g = p.grid;
    const int anchor = results[0].anchor_for(p.initial);
    const Slice v0 = slice0(results[0], 0, anchor);
    const Slice v1 = slice0(results[1], 0, anchor);
    const Slice v2 = slice0(results[2], 0, anchor);
    double excess = 0.0;
    for (std::size_t q = 0; q < g.size(); ++q) {
        if (!g.active(q) || is_sentinel(v0[q])) continue;
        excess = std::max({excess, v2[q] - v1[q], v1[q] - v0[q]});
    }
    rep.check(excess <= 1e-9, "maze v(L=2) <= v(L=1) <= v(L=0), worst excess " + fmt(excess));

    // Largest violation of V <= (C+)Theta over stored slices; between them
    // values are interpolated in time.
    auto violation = [](const SolveResult& r, const Problem& prob) {
        double worst = 0.0;
        for (const auto& f : r.fields) {
            if (r.observations == ObservationKind::bounded && f.layer + 1 >= r.layers) continue;
            const std::vector<int>& kept = f.values.retained();
            for (std::size_t i = 0; i < kept.size(); i += std::max<std::size_t>(1, kept.size() / 16)) {
                const double t = kept[i] * f.values.dt();
                for (double x : observation_gap(r, prob, f.layer, f.anchor, t)) {
                    if (!is_sentinel(x)) worst = std::max(worst, -x);
                }
            }
        }
        return worst;
    };
    const double maze_violation = violation(results[2], p);
    rep.check(maze_violation <= 1e-9, "maze bounded V <= Theta, worst violation " + fmt(maze_violation));
    // The paid loop builds the obstacle from the previous iterate, so the
    // violation is bounded by the last residual; check the fixed point at a
    // tolerance below the feasibility threshold and the bound at the fixture's.
    ScenarioSpec tight = mars_problem().spec;
    tight.solve.tol = 1e-10;
    const Problem pt = build_problem(tight);
    const double tight_violation = violation(solve(pt), pt);
    rep.check(tight_violation <= 1e-9, "mars paid at tol 1e-10: V <= C+Theta, worst violation " + fmt(tight_violation));
    const SolveResult& loose = mars_paid(mars_problem());
    const double lag = violation(loose, mars_problem());
    rep.check(lag <= loose.residual_history.back(), "mars paid at tol 1e-6: violation " + fmt(lag) +
                                                          " <= final residual " +
                                                          fmt(loose.residual_history.back()));

    // Complementarity on the maze where observing is strictly worse.
    const SolveResult& r = results[2];
    const ValueField& f = r.at(0, anchor).values;
    const Slice gap = observation_gap(r, p, 0, anchor, 0.0);
    auto s0 = f.slice(0);
    auto s1 = f.slice(1);
    const Distribution b1 = propagate_belief(p.chain, r.at(0, anchor).belief, f.dt());
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
    double residual = 0.0;
    int checked = 0;
    while (checked < 1000) {
        const std::size_t q = pick(rng);
        if (g.kind(q) != PointKind::free || is_sentinel(s1[q]) || is_sentinel(gap[q]) || gap[q] <= 1e-9) continue;
        const int i = static_cast<int>(q % g.side());
        const int j = static_cast<int>(q / g.side());
        double kbar = 0.0;
        for (int m = 0; m < p.modes(); ++m) kbar += b1(m) * p.costs.running[m][q];
        const double res = (s1[q] - s0[q]) / f.dt() + kbar - p.speed[q] * upwind_gradient_norm(s1, g, i, j);
        residual = std::max(residual, std::abs(res));
        ++checked;
    }
    rep.check(residual <= 10 * s.solve.tol,
              "complementarity residual at 1000 points " + fmt(residual) + " <= 10 tol");
}

void monte_carlo(Report& rep) {
    const auto t0 = Clock::now();
    for (const char* file : {"two_mode.json", "rt_corridor.json"}) {
        const Problem p = fixture::problem(file);
        const SolveResult r = solve(p);
        const McSummary mc = mc_evaluate(r, p, *p.spec.start, 10000, p.spec.seed);
        const double v = value_at(r, p, *p.spec.start);
        const double allowed = 3 * mc.std_error + 5 * p.grid.spacing();
        rep.check(mc.diverged == 0 && std::abs(mc.mean - v) <= allowed,
                  std::string(file) + " mean " + fmt(mc.mean) + " +- " + fmt(mc.std_error) + " vs v " + fmt(v) +
                      " (allowed " + fmt(allowed, 3) + ")");
    }
    const double secs = seconds_since(t0);
    rep.check(secs < 60.0, "runtime " + fmt(secs, 3) + " s");
}

void qualitative(Report& rep) {
    {
        const Problem p = fixture::problem("rotating_finite.json", 200);
        const SolveResult with = solve(p);
        ScenarioSpec n = p.spec;
        n.solve.observations = {};
        const Problem pn = build_problem(n);
        const SolveResult without = solve(pn);
        TraceOptions o;
        o.scripted_modes = {1, 2, 3};
        const Point2 a = position_at(trace_trajectory(with, p, *p.spec.start, o), 1.0);
        const Point2 b = position_at(trace_trajectory(without, pn, *p.spec.start, {}), 1.0);
        const double da = std::hypot(a[0] - 0.5, a[1] - 0.5);
        const double db = std::hypot(b[0] - 0.5, b[1] - 0.5);
        rep.check(da < db, "rotating distance to centre at t=1: " + fmt(da, 4) + " with observations, " +
                               fmt(db, 4) + " without");
    }
    {
        const Problem p = fixture::problem("barriers.json", 200);
        const SolveResult r = solve(p);
        const SimTrace t = trace_trajectory(r, p, *p.spec.start, {});
        double s = -1.0;
        for (const auto& e : t.events) {
            if (e.kind != EventKind::observation) continue;
            const Point2 at = position_at(t, e.time);
            s = (at[0] + at[1]) / std::sqrt(2.0);
            break;
        }
        rep.check(s > 0.5 && s < 0.95,
                  "barriers observation at diagonal coordinate " + fmt(s, 4) + " between barriers (0.5, 0.95)");
    }
    {
        const Problem& p = mars_problem();
        ScenarioSpec fine = p.spec;
        fine.subdivisions = 200;
        const Problem pf = build_problem(fine);
        const SolveResult r = solve(pf);
        const int anchor = r.anchor_for(pf.initial);
        const Slice gap = observation_gap(r, pf, 0, anchor, 0.0);
        const ValueField& v = r.at(0, anchor).values;
        double scale = 1.0;
        for (double x : v.slice(0)) {
            if (!is_sentinel(x)) scale = std::max(scale, std::abs(x));
        }
        int region = 0;
        for (std::size_t q = 0; q < gap.size(); ++q) region += pf.grid.active(q) && gap[q] <= 1e-9 * scale;
        rep.check(region > 0, "mars paid observation region at J=200: " + std::to_string(region) + " points");
    }
}

void determinism(Report& rep) {
    std::vector<std::string> manifests;
    std::vector<std::string> traces;
    for (int run = 0; run < 2; ++run) {
        const std::string dir = fixture::temp_dir("acceptance_det");
        const int a = fixture::run_tool({"solve", "--scenario", fixture::scenario_path("two_mode.json"), "--out", dir});
        const int b = fixture::run_tool({"simulate", "--out", dir, "--seed", "7", "--runs", "5"});
        rep.check(a == 0 && b == 0, "run " + std::to_string(run + 1) + " exit codes " + std::to_string(a) + ", " +
                                        std::to_string(b));
        manifests.push_back(fixture::read_file(dir + "/manifest.json"));
        traces.push_back(fixture::read_file(dir + "/traces/seed7_run4.json"));
    }
    rep.check(!manifests[0].empty() && manifests[0] == manifests[1], "manifests byte-identical");
    rep.check(!traces[0].empty() && traces[0] == traces[1], "traces byte-identical");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Report&)>>> criteria = {
        {"stationary distributions", stationary_distributions},
        {"conditioned-belief limit", conditioned_limit},
        {"horizon bounds", horizon_bounds},
        {"iteration counts", iteration_counts},
        {"eikonal convergence", eikonal_convergence},
        {"oracle equivalence", oracle_equivalence},
        {"dominance and feasibility", dominance_feasibility},
        {"Monte Carlo consistency", monte_carlo},
        {"qualitative behaviour", qualitative},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Report rep;
        const auto t0 = Clock::now();
        try {
            criteria[i].second(rep);
        } catch (const std::exception& e) {
            rep.check(false, std::string("exception: ") + e.what());
        }
        failed += rep.pass ? 0 : 1;
        std::printf("criterion %zu %s: %s (%.1f s)%s\n", i + 1, criteria[i].first.c_str(), rep.pass ? "PASS" : "FAIL",
                    seconds_since(t0), rep.notes.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
