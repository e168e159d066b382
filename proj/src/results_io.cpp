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

#include "oopdmp/results_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace oopdmp {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "oopdmp-results";
constexpr int kVersion = 1;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("write failed for " + path.string());
}

std::string encode_f64(std::span<const double> values) {
    std::string out(values.size() * 8, '\0');
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(values[i]);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        std::memcpy(out.data() + 8 * i, &bits, 8);
    }
    return out;
}

void decode_f64(const std::string& bytes, std::size_t offset, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, bytes.data() + offset + 8 * i, 8);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        out[i] = std::bit_cast<double>(bits);
    }
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

std::string field_stem(int layer, int anchor) {
    return "values/layer" + std::to_string(layer) + "_anchor" + std::to_string(anchor);
}

// Copies every referenced raster next to the results so the stored scenario
// is self-contained; returns the rewritten spec and (relative path, bytes).
ScenarioSpec localize_rasters(ScenarioSpec spec, std::vector<std::pair<std::string, std::string>>& files) {
    std::map<std::string, std::string> renamed;
    auto take = [&](std::string& path) {
        const std::string source = resolve_path(spec.base_dir, path);
        auto it = renamed.find(source);
        if (it == renamed.end()) {
            const std::string rel = "inputs/" + std::to_string(renamed.size()) + "_" +
                                    fs::path(source).filename().string();
            files.emplace_back(rel, read_file(source));
            it = renamed.emplace(source, rel).first;
        }
        path = it->second;
    };
    auto field = [&](FieldSpec& f) {
        if (f.kind == FieldKind::raster) take(f.path);
    };
    auto shapes = [&](std::vector<ShapeSpec>& list) {
        for (auto& s : list) {
            if (s.kind == ShapeKind::raster_mask) take(s.path);
        }
    };
    field(spec.speed);
    if (spec.broken_speed) field(*spec.broken_speed);
    for (auto& m : spec.modes) {
        field(m.cost);
        field(m.terminal);
        if (m.premature) field(*m.premature);
    }
    field(spec.solve.observations.cost);
    shapes(spec.obstacles);
    shapes(spec.target);
    return spec;
}

ojson solve_summary(const SolveResult& r) {
    ojson j;
    j["regime"] = to_string(r.regime);
    j["observations"] = to_string(r.observations);
    j["fully_observed"] = r.fully_observed;
    j["conditioned"] = r.conditioned;
    j["modes"] = r.modes;
    j["layers"] = r.layers;
    j["horizon_used"] = r.horizon_used;
    j["discount"] = r.discount;
    j["schedule"] = r.schedule;
    j["iterations_used"] = r.iterations_used;
    j["residual_history"] = r.residual_history;
    j["converged"] = r.converged;
    return j;
}

Regime parse_regime(const std::string& s) {
    for (Regime r : {Regime::finite, Regime::infinite_periodic, Regime::indefinite,
                     Regime::randomly_terminated}) {
        if (s == to_string(r)) return r;
    }
    throw InputError("manifest: unknown regime " + s);
}

ObservationKind parse_observations(const std::string& s) {
    for (ObservationKind k : {ObservationKind::none, ObservationKind::scheduled,
                              ObservationKind::bounded, ObservationKind::paid}) {
        if (s == to_string(k)) return k;
    }
    throw InputError("manifest: unknown observation scheme " + s);
}

ojson trace_json(const SimTrace& trace) {
    ojson j;
    j["seed"] = trace.seed;
    j["stochastic"] = trace.stochastic;
    j["reached_target"] = trace.reached_target;
    j["terminated"] = trace.terminated;
    j["observations"] = trace.observations;
    j["realized_cost"] = trace.realized_cost;
    ojson path = ojson::array();
    for (const auto& p : trace.path) {
        path.push_back({p.time, p.position[0], p.position[1], p.layer, p.anchor, p.since_observation,
                        p.running_cost});
    }
    j["path_columns"] = {"time", "x", "y", "layer", "anchor", "since_observation", "running_cost"};
    j["path"] = std::move(path);
    ojson events = ojson::array();
    for (const auto& e : trace.events) {
        events.push_back({{"kind", to_string(e.kind)},
                          {"time", e.time},
                          {"from", e.from},
                          {"mode", e.mode},
                          {"cost", e.cost}});
    }
    j["events"] = std::move(events);
    return j;
}

Manifest write_manifest(const fs::path& out, const ojson& solve,
                        const std::map<std::string, std::string>& overrides) {
    Manifest m;
    m.overrides = overrides;
    std::vector<fs::path> paths;
    for (const auto& entry : fs::recursive_directory_iterator(out)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), out);
        if (rel == "manifest.json") continue;
        paths.push_back(rel);
    }
    std::sort(paths.begin(), paths.end());
    ojson files = ojson::array();
    for (const auto& rel : paths) {
        const std::string bytes = read_file(out / rel);
        ManifestEntry e{rel.generic_string(), sha256_hex(bytes), bytes.size()};
        files.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
        m.files.push_back(std::move(e));
    }
    ojson j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["scenario"] = "scenario.json";
    j["solve"] = solve;
    j["overrides"] = ojson::object();
    for (const auto& [k, v] : overrides) j["overrides"][k] = v;
    j["files"] = std::move(files);
    write_file(out / "manifest.json", dump(j));
    return m;
}

ojson load_manifest(const fs::path& out) {
    const fs::path path = out / "manifest.json";
    if (!fs::exists(path)) throw InputError("no manifest.json in " + out.string());
    ojson j;
    try {
        j = ojson::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed manifest " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != kFormat) throw InputError("not a result manifest: " + path.string());
    return j;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

std::string trace_to_json(const SimTrace& trace) { return dump(trace_json(trace)); }

SimTrace trace_from_json(const std::string& text) {
    SimTrace t;
    try {
        const ojson j = ojson::parse(text);
        t.seed = j.at("seed").get<std::uint64_t>();
        t.stochastic = j.at("stochastic").get<bool>();
        t.reached_target = j.at("reached_target").get<bool>();
        t.terminated = j.at("terminated").get<bool>();
        t.observations = j.at("observations").get<int>();
        t.realized_cost = j.at("realized_cost").get<double>();
        for (const auto& p : j.at("path")) {
            t.path.push_back({p[0].get<double>(), {p[1].get<double>(), p[2].get<double>()},
                              p[3].get<int>(), p[4].get<int>(), p[5].get<double>(), p[6].get<double>()});
        }
        for (const auto& e : j.at("events")) {
            const std::string kind = e.at("kind").get<std::string>();
            EventKind k = EventKind::mode_switch;
            for (EventKind c : {EventKind::mode_switch, EventKind::observation,
                                EventKind::premature_termination, EventKind::goal_reached,
                                EventKind::horizon_end}) {
                if (kind == to_string(c)) k = c;
            }
            t.events.push_back({k, e.at("time").get<double>(), e.at("from").get<int>(),
                                e.at("mode").get<int>(), e.at("cost").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed trace: ") + e.what());
    }
    return t;
}

Manifest write_results(const SolveResult& result, const ScenarioSpec& spec,
                       const std::vector<SimTrace>& traces, const std::string& out_dir,
                       const std::map<std::string, std::string>& overrides) {
    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw InputError("cannot create " + out.string() + ": " + ec.message());
    for (const char* sub : {"values", "traces", "inputs", "export"}) fs::remove_all(out / sub, ec);

    std::vector<std::pair<std::string, std::string>> inputs;
    ScenarioSpec stored = localize_rasters(spec, inputs);
    for (const auto& [rel, bytes] : inputs) write_file(out / rel, bytes);
    write_file(out / "scenario.json", serialize_scenario(stored));

    const int side = spec.subdivisions + 1;
    for (const auto& f : result.fields) {
        const std::string stem = field_stem(f.layer, f.anchor);
        std::string payload;
        for (int k : f.values.retained()) payload += encode_f64(f.values.slice(k));
        write_file(out / (stem + ".f64"), payload);
        ojson side_car;
        side_car["layer"] = f.layer;
        side_car["anchor"] = f.anchor;
        side_car["belief"] = std::vector<double>(f.belief.data(), f.belief.data() + f.belief.size());
        side_car["start_time"] = f.start_time;
        side_car["grid"] = {{"J", spec.subdivisions}, {"rows", side}, {"cols", side}};
        side_car["layout"] = "row-major, row j at y = j/J, little-endian float64";
        side_car["dt"] = f.values.dt();
        side_car["steps"] = f.values.steps();
        side_car["stride"] = f.values.stride();
        side_car["slices"] = f.values.retained();
        side_car["data"] = fs::path(stem + ".f64").filename().string();
        write_file(out / (stem + ".json"), dump(side_car));
    }
    for (std::size_t i = 0; i < traces.size(); ++i) {
        write_file(out / ("traces/trace_" + std::to_string(i) + ".json"), trace_to_json(traces[i]));
    }
    return write_manifest(out, solve_summary(result), overrides);
}

Manifest append_traces(const std::string& out_dir, const std::vector<SimTrace>& traces,
                       const std::vector<std::string>& names) {
    const fs::path out(out_dir);
    const ojson j = load_manifest(out);
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const std::string name = i < names.size() ? names[i] : "trace_" + std::to_string(i);
        write_file(out / "traces" / (name + ".json"), trace_to_json(traces[i]));
    }
    std::map<std::string, std::string> overrides;
    for (const auto& [k, v] : j.at("overrides").items()) overrides[k] = v.get<std::string>();
    return write_manifest(out, j.at("solve"), overrides);
}

StoredResults read_results(const std::string& out_dir) {
    const fs::path out(out_dir);
    const ojson j = load_manifest(out);
    StoredResults s;
    for (const auto& [k, v] : j.at("overrides").items()) s.manifest.overrides[k] = v.get<std::string>();
    for (const auto& e : j.at("files")) {
        ManifestEntry entry{e.at("path").get<std::string>(), e.at("sha256").get<std::string>(),
                            e.at("bytes").get<std::size_t>()};
        const fs::path path = out / entry.path;
        if (!fs::exists(path)) throw InputError("listed file missing: " + path.string());
        if (sha256_hex(read_file(path)) != entry.sha256) {
            throw InputError("hash mismatch for " + path.string());
        }
        s.manifest.files.push_back(std::move(entry));
    }
    s.spec = parse_scenario(read_file(out / "scenario.json"), out.string());

    const ojson& solve = j.at("solve");
    SolveResult& r = s.result;
    r.regime = parse_regime(solve.at("regime").get<std::string>());
    r.observations = parse_observations(solve.at("observations").get<std::string>());
    r.fully_observed = solve.at("fully_observed").get<bool>();
    r.conditioned = solve.at("conditioned").get<bool>();
    r.modes = solve.at("modes").get<int>();
    r.layers = solve.at("layers").get<int>();
    r.horizon_used = solve.at("horizon_used").get<double>();
    r.discount = solve.at("discount").get<double>();
    r.schedule = solve.at("schedule").get<std::vector<double>>();
    r.iterations_used = solve.at("iterations_used").get<int>();
    r.residual_history = solve.at("residual_history").get<std::vector<double>>();
    r.converged = solve.at("converged").get<bool>();

    for (const auto& entry : s.manifest.files) {
        const fs::path rel(entry.path);
        if (rel.parent_path() != "values" || rel.extension() != ".json") continue;
        const ojson side_car = ojson::parse(read_file(out / rel));
        const int points = side_car.at("grid").at("rows").get<int>() * side_car.at("grid").at("cols").get<int>();
        ValueField field(static_cast<std::size_t>(points), side_car.at("steps").get<int>(),
                         side_car.at("dt").get<double>(), side_car.at("stride").get<int>());
        const auto slices = side_car.at("slices").get<std::vector<int>>();
        if (slices != field.retained()) throw InputError("slice list mismatch in " + rel.string());
        const std::string payload =
            read_file(out / rel.parent_path() / side_car.at("data").get<std::string>());
        if (payload.size() != slices.size() * static_cast<std::size_t>(points) * 8) {
            throw InputError("payload size mismatch for " + rel.string());
        }
        for (std::size_t i = 0; i < slices.size(); ++i) {
            decode_f64(payload, i * static_cast<std::size_t>(points) * 8, field.slice(slices[i]));
        }
        const auto belief = side_car.at("belief").get<std::vector<double>>();
        r.fields.push_back({side_car.at("layer").get<int>(), side_car.at("anchor").get<int>(),
                            Eigen::Map<const Eigen::VectorXd>(belief.data(),
                                                              static_cast<Eigen::Index>(belief.size())),
                            side_car.at("start_time").get<double>(), std::move(field)});
    }
    return s;
}

}  // namespace oopdmp
