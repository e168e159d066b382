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

#include "oopdmp/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "oopdmp/contour.hpp"
#include "oopdmp/diagnostics.hpp"
#include "oopdmp/eikonal.hpp"
#include "oopdmp/policy.hpp"
#include "oopdmp/results_io.hpp"
#include "oopdmp/solvers.hpp"

namespace oopdmp {

namespace fs = std::filesystem;

namespace {

struct Flags {
    std::string scenario;
    std::string out;
    std::optional<int> subdivisions;
    std::optional<double> tol;
    std::optional<double> horizon;
    std::optional<std::uint64_t> seed;
    int runs = 1;
    std::optional<int> layer;
    std::optional<int> anchor;
    std::optional<int> threads;
    std::optional<double> time;
    std::vector<double> start;
    std::vector<int> observe;
    bool deterministic = false;
};

std::string number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void apply_threads(const Flags& f) {
    std::optional<int> n = f.threads;
    if (!n) {
        if (const char* env = std::getenv("OOPDMP_THREADS")) {
            try {
                n = std::stoi(env);
            } catch (const std::exception&) {
                throw InputError(std::string("OOPDMP_THREADS is not an integer: ") + env);
            }
        }
    }
    if (n && *n < 1) throw InputError("thread count must be at least 1");
    if (n) set_thread_count(*n);
}

// Scenario with command-line overrides applied; overrides are also returned
// as strings for the manifest.
ScenarioSpec load_with_overrides(const Flags& f, std::map<std::string, std::string>& record) {
    if (f.scenario.empty()) throw InputError("--scenario is required");
    ScenarioSpec spec = load_scenario(f.scenario);
    if (f.subdivisions) {
        if (*f.subdivisions < 2) throw InputError("--J must be at least 2");
        spec.subdivisions = *f.subdivisions;
        record["J"] = std::to_string(*f.subdivisions);
    }
    if (f.tol) {
        if (!(*f.tol > 0.0)) throw InputError("--tol must be positive");
        spec.solve.tol = *f.tol;
        record["tol"] = number(*f.tol);
    }
    if (f.horizon) {
        if (!(*f.horizon > 0.0)) throw InputError("--horizon must be positive");
        spec.solve.horizon = *f.horizon;
        record["horizon"] = number(*f.horizon);
    }
    if (f.seed) {
        spec.seed = *f.seed;
        record["seed"] = std::to_string(*f.seed);
    }
    return spec;
}

Point2 start_point(const Flags& f, const ScenarioSpec& spec) {
    if (!f.start.empty()) {
        if (f.start.size() != 2) throw InputError("--start expects x,y");
        return {f.start[0], f.start[1]};
    }
    if (!spec.start) throw InputError("no start point: pass --start or set \"start\" in the scenario");
    return *spec.start;
}

int cmd_solve(const Flags& f, std::ostream& out, std::ostream& err) {
    if (f.out.empty()) throw InputError("--out is required");
    std::map<std::string, std::string> overrides;
    const ScenarioSpec spec = load_with_overrides(f, overrides);
    const Problem problem = build_problem(spec);
    SolveResult result;
    try {
        result = solve(problem);
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << "\n";
        return exit_not_converged;
    }
    write_results(result, spec, {}, f.out, overrides);
    out << "regime: " << to_string(result.regime)
        << (result.fully_observed ? " (fully observed)" : "") << "\n";
    out << "observations: " << to_string(result.observations) << "\n";
    out << "horizon_used: " << number(result.horizon_used) << " " << spec.time_units << "\n";
    out << "iterations_used: " << result.iterations_used << "\n";
    out << "final_residual: "
        << (result.residual_history.empty() ? std::string("n/a") : number(result.residual_history.back()))
        << "\n";
    if (!result.converged) {
        err << "warning: iteration cap reached before the tolerance; results written with "
               "converged=false\n";
        return exit_not_converged;
    }
    return exit_ok;
}

int cmd_bound(const Flags& f, std::ostream& out) {
    std::map<std::string, std::string> overrides;
    ScenarioSpec spec = load_with_overrides(f, overrides);
    spec.solve.horizon.reset();
    const Problem problem = build_problem(spec);
    const ArrivalField z = solve_min_time(problem.grid, problem.speed);
    out << "max_min_time: " << number(z.max_finite()) << " " << spec.time_units << "\n";
    out << "horizon_bound: " << number(indefinite_horizon(problem)) << " " << spec.time_units << "\n";
    return exit_ok;
}

StoredResults load_results(const Flags& f) {
    if (f.out.empty()) throw InputError("--out must name a solve output directory");
    return read_results(f.out);
}

int cmd_simulate(const Flags& f, std::ostream& out) {
    StoredResults stored = load_results(f);
    const Problem problem = build_problem(stored.spec);
    const std::uint64_t seed = f.seed.value_or(stored.spec.seed);
    const Point2 start = start_point(f, stored.spec);
    std::vector<SimTrace> traces;
    std::vector<std::string> names;
    const int runs = f.deterministic ? 1 : f.runs;
    if (runs < 1) throw InputError("--runs must be at least 1");
    for (int i = 0; i < runs; ++i) {
        TraceOptions o;
        o.stochastic = !f.deterministic;
        o.seed = f.deterministic ? seed : derive_seed(seed, static_cast<std::uint64_t>(i));
        o.scripted_modes = f.observe;
        traces.push_back(trace_trajectory(stored.result, problem, start, o));
        names.push_back(f.deterministic ? "deterministic"
                                        : "seed" + std::to_string(seed) + "_run" + std::to_string(i));
    }
    append_traces(f.out, traces, names);
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const SimTrace& t = traces[i];
        out << names[i] << ": cost " << number(t.realized_cost) << ", steps " << t.path.size()
            << ", observations " << t.observations << (t.reached_target ? ", reached target" : "")
            << (t.terminated ? ", terminated" : "") << "\n";
    }
    return exit_ok;
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
    StoredResults stored = load_results(f);
    const Problem problem = build_problem(stored.spec);
    const std::uint64_t seed = f.seed.value_or(stored.spec.seed);
    const Point2 start = start_point(f, stored.spec);
    const McSummary s = mc_evaluate(stored.result, problem, start, f.runs, seed);
    const double v = value_at(stored.result, problem, start);
    out << "runs: " << s.runs << "\n";
    out << "diverged: " << s.diverged << "\n";
    out << "mean: " << number(s.mean) << "\n";
    out << "stderr: " << number(s.std_error) << "\n";
    out << "pde_value: " << number(v) << "\n";
    out << "difference: " << number(s.mean - v) << "\n";
    return exit_ok;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream o(path, std::ios::binary | std::ios::trunc);
    if (!o) throw InputError("cannot write " + path.string());
    o << text;
}

int cmd_export(const Flags& f, std::ostream& out) {
    StoredResults stored = load_results(f);
    const Problem problem = build_problem(stored.spec);
    const SolveResult& r = stored.result;
    const int layer = f.layer.value_or(0);
    int anchor = f.anchor.value_or(r.fully_observed ? std::max(basis_index(problem.initial), 0)
                                                    : r.anchor_for(problem.initial));
    if (!f.anchor && r.find(layer, anchor) == nullptr && r.fields.size() == 1) anchor = r.fields.front().anchor;
    if (layer < 0 || layer >= r.layers) throw InputError("--layer out of range");
    if (r.find(layer, anchor) == nullptr) throw InputError("--anchor out of range for this layer");
    const double t = f.time.value_or(0.0);
    const ValueLayer& field = r.at(layer, anchor);
    const Grid2D& grid = problem.grid;

    const bool has_gap = (r.observations == ObservationKind::paid ||
                          (r.observations == ObservationKind::bounded && layer + 1 < r.layers)) &&
                         !r.fully_observed;
    Slice values(grid.size());
    double scale = 1.0;
    for (std::size_t q = 0; q < grid.size(); ++q) {
        values[q] = field.values.sample(q, t);
        if (!is_sentinel(values[q])) scale = std::max(scale, std::abs(values[q]));
    }
    Slice gap = has_gap ? observation_gap(r, problem, layer, anchor, t) : Slice(grid.size(), kInfinity);
    const double level = 1e-9 * scale;

    const fs::path dir = fs::path(f.out) / "export";
    const std::string suffix = "layer" + std::to_string(layer) + "_anchor" + std::to_string(anchor);
    std::ostringstream vcsv;
    vcsv << std::setprecision(17) << "x,y,value,gap,observe\n";
    int region = 0;
    for (int j = 0; j < grid.side(); ++j) {
        for (int i = 0; i < grid.side(); ++i) {
            const std::size_t q = grid.index(i, j);
            const bool observe = has_gap && gap[q] <= level;
            region += observe ? 1 : 0;
            vcsv << grid.coord(i) << "," << grid.coord(j) << "," << values[q] << ","
                 << (has_gap ? gap[q] : kInfinity) << "," << (observe ? 1 : 0) << "\n";
        }
    }
    write_text(dir / ("values_" + suffix + ".csv"), vcsv.str());

    std::ostringstream ccsv;
    ccsv << std::setprecision(17) << "x0,y0,x1,y1\n";
    std::size_t segments = 0;
    if (has_gap) {
        for (const auto& s : contour_segments(grid, gap, level)) {
            ccsv << s.a[0] << "," << s.a[1] << "," << s.b[0] << "," << s.b[1] << "\n";
            ++segments;
        }
    }
    write_text(dir / ("contour_" + suffix + ".csv"), ccsv.str());

    std::size_t trajectories = 0;
    const fs::path traces = fs::path(f.out) / "traces";
    if (fs::exists(traces)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(traces)) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& p : files) {
            std::ifstream in(p);
            std::stringstream ss;
            ss << in.rdbuf();
            const SimTrace trace = trace_from_json(ss.str());
            std::ostringstream tcsv;
            tcsv << std::setprecision(17) << "time,x,y,layer,anchor,since_observation,running_cost\n";
            for (const auto& pt : trace.path) {
                tcsv << pt.time << "," << pt.position[0] << "," << pt.position[1] << "," << pt.layer
                     << "," << pt.anchor << "," << pt.since_observation << "," << pt.running_cost << "\n";
            }
            write_text(dir / ("trajectory_" + p.stem().string() + ".csv"), tcsv.str());
            ++trajectories;
        }
    }
    out << "exported layer " << layer << " anchor " << anchor << " at t=" << number(t) << "\n";
    out << "observation_region_points: " << region << "\n";
    out << "contour_segments: " << segments << "\n";
    out << "trajectories: " << trajectories << "\n";
    return exit_ok;
}

void report_input_error(const InputError& e, std::ostream& err) {
    err << "error: " << e.what() << "\n";
    for (const auto& d : e.details()) err << "  " << d << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Solver for occasionally observed piecewise-deterministic processes", "oopdmp"};
    app.require_subcommand(1);
    Flags f;

    auto add_threads = [&](CLI::App* c) {
        c->add_option("--threads", f.threads, "Worker threads (default: OOPDMP_THREADS or all cores)");
    };
    auto add_scenario = [&](CLI::App* c) {
        c->add_option("--scenario", f.scenario, "Scenario JSON file")->required();
        c->add_option("--J", f.subdivisions, "Grid subdivisions per axis");
        c->add_option("--tol", f.tol, "Iteration tolerance");
        c->add_option("--horizon", f.horizon, "Horizon, period or indefinite-horizon override");
        c->add_option("--seed", f.seed, "Random seed");
        add_threads(c);
    };

    CLI::App* solve_cmd = app.add_subcommand("solve", "Solve a scenario and write results");
    add_scenario(solve_cmd);
    solve_cmd->add_option("--out", f.out, "Output directory")->required();

    CLI::App* bound_cmd = app.add_subcommand("bound", "Print the indefinite-horizon bound");
    add_scenario(bound_cmd);

    CLI::App* sim_cmd = app.add_subcommand("simulate", "Trace trajectories from a stored solve");
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Monte Carlo evaluation of a stored solve");
    for (CLI::App* c : {sim_cmd, eval_cmd}) {
        c->add_option("--out", f.out, "Directory written by solve")->required();
        c->add_option("--scenario", f.scenario, "Ignored; the stored scenario is used");
        c->add_option("--seed", f.seed, "Random seed (default: scenario seed)");
        c->add_option("--runs", f.runs, "Number of runs");
        c->add_option("--start", f.start, "Start point x,y (default: scenario start)")->delimiter(',');
        add_threads(c);
    }
    sim_cmd->add_flag("--deterministic", f.deterministic,
                      "Belief-expected trace with scripted observations");
    sim_cmd->add_option("--observe", f.observe, "Observed modes for deterministic traces")->delimiter(',');

    CLI::App* export_cmd = app.add_subcommand("export-policy", "Write plot-ready CSV files");
    export_cmd->add_option("--out", f.out, "Directory written by solve")->required();
    export_cmd->add_option("--layer", f.layer, "Observation layer");
    export_cmd->add_option("--anchor", f.anchor, "Anchor index (modes; M for the initial belief)");
    export_cmd->add_option("--time", f.time, "Time since the last observation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return exit_input;
    }

    try {
        apply_threads(f);
        if (solve_cmd->parsed()) return cmd_solve(f, out, err);
        if (bound_cmd->parsed()) return cmd_bound(f, out);
        if (sim_cmd->parsed()) return cmd_simulate(f, out);
        if (eval_cmd->parsed()) return cmd_evaluate(f, out);
        if (export_cmd->parsed()) return cmd_export(f, out);
    } catch (const InputError& e) {
        report_input_error(e, err);
        return exit_input;
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << "\n";
        return exit_not_converged;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_input;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_input;
    }
    return exit_input;
}

}  // namespace oopdmp
