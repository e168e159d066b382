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

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>

#include "oopdmp/results_io.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;

namespace {

// Number following "key: " in tool output.
double field(const std::string& text, const std::string& key) {
    const std::regex re(key + ": ([-+0-9.eE]+)");
    std::smatch m;
    if (!std::regex_search(text, m, re)) return std::nan("");
    return std::stod(m[1].str());
}

std::size_t line_count(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("solve writes a result directory and reports the run") {
    const std::string dir = fixture::temp_dir("cli_solve");
    std::string out;
    const auto t0 = std::chrono::steady_clock::now();
    const int code = fixture::run_tool(
        {"solve", "--scenario", fixture::scenario_path("two_mode.json"), "--J", "11", "--out", dir}, &out);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(code == 0);
    CHECK(seconds < 1.0);
    CHECK(out.find("regime: finite") != std::string::npos);
    CHECK(fs::exists(fs::path(dir) / "manifest.json"));

    const oopdmp::StoredResults s = oopdmp::read_results(dir);
    CHECK(s.spec.subdivisions == 11);
    CHECK(s.manifest.overrides.at("J") == "11");
}

TEST_CASE("input problems exit with status 1") {
    const std::string dir = fixture::temp_dir("cli_bad");
    CHECK(fixture::run_tool({}) == 1);
    CHECK(fixture::run_tool({"frobnicate"}) == 1);
    CHECK(fixture::run_tool({"solve", "--scenario", "/nonexistent.json", "--out", dir}) == 1);
    CHECK(fixture::run_tool({"solve", "--scenario", fixture::scenario_path("two_mode.json"), "--J", "1",
                             "--out", dir}) == 1);
    CHECK(fixture::run_tool({"simulate", "--out", dir}) == 1);
    CHECK(fixture::run_tool({"evaluate", "--out", dir}) == 1);
    CHECK(fixture::run_tool({"export-policy", "--out", dir}) == 1);
}

TEST_CASE("an iteration cap below convergence exits with status 2") {
    const std::string dir = fixture::temp_dir("cli_cap");
    oopdmp::ScenarioSpec spec = fixture::load("rotating_periodic_beta05.json", 20);
    spec.solve.max_iters = 2;
    const std::string path = dir + "/capped.json";
    {
        std::ofstream o(path);
        o << oopdmp::serialize_scenario(spec);
    }
    const int code = fixture::run_tool({"solve", "--scenario", path, "--out", dir + "/out"});
    CHECK(code == 2);
    const oopdmp::StoredResults s = oopdmp::read_results(dir + "/out");
    CHECK_FALSE(s.result.converged);
    CHECK(s.result.iterations_used == 2);
}

TEST_CASE("strong discounting converges in a few periods") {
    const std::string dir = fixture::temp_dir("cli_beta6");
    std::string out;
    REQUIRE(fixture::run_tool({"solve", "--scenario", fixture::scenario_path("rotating_periodic_beta6.json"),
                               "--J", "30", "--out", dir},
                              &out) == 0);
    CHECK(field(out, "iterations_used") <= 3);
    CHECK(field(out, "final_residual") <= 1e-6);
}

TEST_CASE("bound prints the minimum-time maximum and horizon") {
    std::string out;
    REQUIRE(fixture::run_tool({"bound", "--scenario", fixture::scenario_path("barriers.json")}, &out) == 0);
    CHECK(field(out, "horizon_bound") == doctest::Approx(14.83).epsilon(0.01));
    CHECK(field(out, "max_min_time") > 0.0);
}

TEST_CASE("simulate is reproducible for a fixed seed") {
    const std::string a = fixture::temp_dir("cli_sim_a");
    const std::string b = fixture::temp_dir("cli_sim_b");
    for (const auto& dir : {a, b}) {
        REQUIRE(fixture::run_tool({"solve", "--scenario", fixture::scenario_path("two_mode.json"), "--out",
                                   dir}) == 0);
        REQUIRE(fixture::run_tool({"simulate", "--out", dir, "--seed", "7", "--runs", "3"}) == 0);
    }
    for (int i = 0; i < 3; ++i) {
        const std::string name = "traces/seed7_run" + std::to_string(i) + ".json";
        const std::string ta = fixture::read_file(a + "/" + name);
        CHECK(!ta.empty());
        CHECK(ta == fixture::read_file(b + "/" + name));
    }
    CHECK(fixture::read_file(a + "/manifest.json") == fixture::read_file(b + "/manifest.json"));
    CHECK_NOTHROW(oopdmp::read_results(a));
}

TEST_CASE("evaluate on a single mode has no sampling error") {
    const std::string dir = fixture::temp_dir("cli_eval");
    REQUIRE(fixture::run_tool({"solve", "--scenario", fixture::scenario_path("single_mode.json"), "--J", "40",
                               "--out", dir}) == 0);
    std::string out;
    REQUIRE(fixture::run_tool({"evaluate", "--out", dir, "--runs", "20"}, &out) == 0);
    CHECK(field(out, "runs") == 20);
    CHECK(field(out, "stderr") <= 1e-12);
    CHECK(std::abs(field(out, "difference")) < 0.1);
}

TEST_CASE("export-policy writes values, contours and trajectories") {
    SUBCASE("no observation gap gives an empty contour") {
        const std::string dir = fixture::temp_dir("cli_export_flat");
        REQUIRE(fixture::run_tool({"solve", "--scenario", fixture::scenario_path("single_mode.json"), "--J",
                                   "20", "--out", dir}) == 0);
        REQUIRE(fixture::run_tool({"simulate", "--out", dir, "--deterministic"}) == 0);
        std::string out;
        REQUIRE(fixture::run_tool({"export-policy", "--out", dir}, &out) == 0);
        CHECK(field(out, "contour_segments") == 0);
        CHECK(field(out, "trajectories") == 1);
        const std::string contour = fixture::read_file(dir + "/export/contour_layer0_anchor0.csv");
        CHECK(line_count(contour) == 1);
        const std::string values = fixture::read_file(dir + "/export/values_layer0_anchor0.csv");
        CHECK(line_count(values) == 1 + 21 * 21);

        const std::string trace = fixture::read_file(dir + "/traces/deterministic.json");
        const oopdmp::SimTrace t = oopdmp::trace_from_json(trace);
        const std::string rows = fixture::read_file(dir + "/export/trajectory_deterministic.csv");
        CHECK(line_count(rows) == 1 + t.path.size());
    }
    SUBCASE("paid observations give a nonempty region and contour") {
        const std::string dir = fixture::temp_dir("cli_export_mars");
        REQUIRE(fixture::run_tool({"solve", "--scenario", fixture::scenario_path("mars.json"), "--J", "50",
                                   "--out", dir}) == 0);
        std::string out;
        REQUIRE(fixture::run_tool({"export-policy", "--out", dir}, &out) == 0);
        CHECK(field(out, "observation_region_points") > 0);
        CHECK(field(out, "contour_segments") > 0);
        CHECK(fixture::run_tool({"export-policy", "--out", dir, "--layer", "9"}) == 1);
    }
}

TEST_CASE("thread count from the environment does not change results") {
    const std::string a = fixture::temp_dir("cli_threads_a");
    const std::string b = fixture::temp_dir("cli_threads_b");
    const std::string scenario = fixture::scenario_path("two_mode.json");
    ::setenv("OOPDMP_THREADS", "1", 1);
    REQUIRE(fixture::run_tool({"solve", "--scenario", scenario, "--out", a}) == 0);
    ::setenv("OOPDMP_THREADS", "3", 1);
    REQUIRE(fixture::run_tool({"solve", "--scenario", scenario, "--out", b}) == 0);
    ::setenv("OOPDMP_THREADS", "zero", 1);
    CHECK(fixture::run_tool({"solve", "--scenario", scenario, "--out", b}) == 1);
    ::unsetenv("OOPDMP_THREADS");
    CHECK(fixture::run_tool({"solve", "--scenario", scenario, "--threads", "0", "--out", b}) == 1);
    REQUIRE(fixture::run_tool({"solve", "--scenario", scenario, "--threads", "2", "--out", b}) == 0);
    CHECK(fixture::read_file(a + "/manifest.json") == fixture::read_file(b + "/manifest.json"));
}

TEST_CASE("overrides are recorded in the manifest") {
    const std::string dir = fixture::temp_dir("cli_overrides");
    REQUIRE(fixture::run_tool({"solve", "--scenario", fixture::scenario_path("two_mode.json"), "--J", "12",
                               "--horizon", "0.5", "--seed", "3", "--out", dir}) == 0);
    const oopdmp::StoredResults s = oopdmp::read_results(dir);
    CHECK(s.manifest.overrides.at("J") == "12");
    CHECK(s.manifest.overrides.at("seed") == "3");
    CHECK(s.manifest.overrides.count("horizon") == 1);
    CHECK(s.result.horizon_used == doctest::Approx(0.5));
    CHECK(s.spec.seed == 3);
}
