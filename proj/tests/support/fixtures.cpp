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

#include "support/fixtures.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fixture {

std::string scenario_path(const std::string& name) {
    return std::string(OOPDMP_SCENARIO_DIR) + "/" + name;
}

oopdmp::ScenarioSpec load(const std::string& name, std::optional<int> subdivisions) {
    oopdmp::ScenarioSpec s = oopdmp::load_scenario(scenario_path(name));
    if (subdivisions) s.subdivisions = *subdivisions;
    return s;
}

oopdmp::Problem problem(const std::string& name, std::optional<int> subdivisions) {
    return oopdmp::build_problem(load(name, subdivisions));
}

std::string temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() /
                         ("oopdmp_" + tag + "_" + std::to_string(::getpid()) + "_" +
                          std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

int run_tool(const std::vector<std::string>& args, std::string* output) {
    std::string cmd = std::string("'") + OOPDMP_CLI_PATH + "'";
    for (const auto& a : args) cmd += " '" + a + "'";
    cmd += " 2>/dev/null";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) return -1;
    std::string text;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) text.append(buf, n);
    const int status = ::pclose(pipe);
    if (output != nullptr) *output = text;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

oopdmp::ScenarioSpec open_square(int subdivisions, oopdmp::Regime regime, double horizon) {
    oopdmp::ScenarioSpec s;
    s.name = "open-square";
    s.subdivisions = subdivisions;
    oopdmp::ModeSpec m;
    m.cost = oopdmp::FieldSpec::constant(1.0);
    s.modes = {m};
    s.rates = {{0.0}};
    s.solve.regime = regime;
    s.solve.horizon = horizon;
    s.start = oopdmp::Point2{0.5, 0.5};
    return s;
}

}  // namespace fixture
