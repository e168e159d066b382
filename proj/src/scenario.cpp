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

#include "oopdmp/scenario.hpp"

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oopdmp/eikonal.hpp"

namespace oopdmp {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const char* to_string(Regime r) {
    switch (r) {
        case Regime::finite: return "finite";
        case Regime::infinite_periodic: return "infinite_periodic";
        case Regime::indefinite: return "indefinite";
        case Regime::randomly_terminated: return "randomly_terminated";
    }
    return "?";
}

const char* to_string(ObservationKind k) {
    switch (k) {
        case ObservationKind::none: return "none";
        case ObservationKind::scheduled: return "scheduled";
        case ObservationKind::bounded: return "bounded";
        case ObservationKind::paid: return "paid";
    }
    return "?";
}

bool ScenarioSpec::operator==(const ScenarioSpec& o) const {
    return name == o.name && subdivisions == o.subdivisions && modes == o.modes &&
           rates == o.rates && termination_rates == o.termination_rates && speed == o.speed &&
           broken_speed == o.broken_speed && obstacles == o.obstacles && target == o.target &&
           solve == o.solve && initial_belief == o.initial_belief && start == o.start &&
           seed == o.seed && time_units == o.time_units;
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
    const std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

namespace {

// Collects every schema and invariant problem with its JSON location.
class Reader {
public:
    explicit Reader(std::string base_dir) : base_dir_(std::move(base_dir)) {}

    std::vector<std::string> problems;

    void fail(const std::string& where, const std::string& what) {
        problems.push_back(where + ": " + what);
    }

    const json* member(const json& obj, const std::string& where, const char* key,
                       bool required) {
        if (!obj.is_object()) {
            fail(where, "expected an object");
            return nullptr;
        }
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) fail(where + "/" + key, "missing required field");
            return nullptr;
        }
        return &*it;
    }

    double number(const json& v, const std::string& where, double fallback = 0.0) {
        if (!v.is_number()) {
            fail(where, "expected a number");
            return fallback;
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(where, "must be finite");
        return d;
    }

    int integer(const json& v, const std::string& where, int fallback = 0) {
        if (!v.is_number_integer()) {
            fail(where, "expected an integer");
            return fallback;
        }
        return v.get<int>();
    }

    std::string text(const json& v, const std::string& where) {
        if (!v.is_string()) {
            fail(where, "expected a string");
            return {};
        }
        return v.get<std::string>();
    }

    Point2 point(const json& v, const std::string& where) {
        if (!v.is_array() || v.size() != 2) {
            fail(where, "expected [x, y]");
            return {0.0, 0.0};
        }
        return {number(v[0], where + "/0"), number(v[1], where + "/1")};
    }

    void check_unit_point(const Point2& p, const std::string& where) {
        if (p[0] < 0.0 || p[0] > 1.0 || p[1] < 0.0 || p[1] > 1.0) {
            fail(where, "must lie in the unit square");
        }
    }

    void check_raster_file(const std::string& path, const std::string& where) {
        try {
            (void)load_raster(resolve_path(base_dir_, path));
        } catch (const InputError& e) {
            fail(where, e.what());
        }
    }

    GaussianTerm gaussian(const json& v, const std::string& where) {
        GaussianTerm t;
        if (auto* a = member(v, where, "amplitude", true)) t.amplitude = number(*a, where + "/amplitude");
        if (auto* c = member(v, where, "center", true)) t.center = point(*c, where + "/center");
        const json* s = member(v, where, "sigma", false);
        const json* cov = member(v, where, "covariance", false);
        if ((s == nullptr) == (cov == nullptr)) {
            fail(where, "exactly one of sigma or covariance is required");
        }
        if (s) {
            t.sigma = number(*s, where + "/sigma");
            if (!(*t.sigma > 0.0)) fail(where + "/sigma", "must be positive");
        }
        if (cov) {
            if (!cov->is_array() || cov->size() != 2 || !(*cov)[0].is_array() ||
                !(*cov)[1].is_array() || (*cov)[0].size() != 2 || (*cov)[1].size() != 2) {
                fail(where + "/covariance", "expected a 2x2 matrix");
            } else {
                const double xx = number((*cov)[0][0], where + "/covariance/0/0");
                const double xy = number((*cov)[0][1], where + "/covariance/0/1");
                const double yx = number((*cov)[1][0], where + "/covariance/1/0");
                const double yy = number((*cov)[1][1], where + "/covariance/1/1");
                if (xy != yx) fail(where + "/covariance", "must be symmetric");
                if (!(xx > 0.0) || !(xx * yy - xy * xy > 0.0)) {
                    fail(where + "/covariance", "must be positive definite");
                }
                t.covariance = std::array<double, 3>{xx, xy, yy};
            }
        }
        if (auto* n = member(v, where, "normalization", false)) {
            const std::string name = text(*n, where + "/normalization");
            if (name == "none") {
                t.norm = GaussianNorm::none;
            } else if (name == "2pi_sigma") {
                t.norm = GaussianNorm::two_pi_sigma;
                if (cov) fail(where + "/normalization", "2pi_sigma needs sigma");
            } else if (name == "2pi_sqrt_det") {
                t.norm = GaussianNorm::two_pi_sqrt_det;
            } else {
                fail(where + "/normalization", "unknown normalization '" + name + "'");
            }
        }
        return t;
    }

    FieldSpec field(const json& v, const std::string& where) {
        FieldSpec f;
        if (v.is_number()) {
            f.value = number(v, where);
            return f;
        }
        const json* kind = member(v, where, "kind", true);
        if (!kind) return f;
        const std::string k = text(*kind, where + "/kind");
        if (k == "constant") {
            if (auto* c = member(v, where, "value", true)) f.value = number(*c, where + "/value");
        } else if (k == "gaussian_sum") {
            f.kind = FieldKind::gaussian_sum;
            if (auto* b = member(v, where, "base", false)) f.value = number(*b, where + "/base");
            if (auto* terms = member(v, where, "terms", true)) {
                if (!terms->is_array()) {
                    fail(where + "/terms", "expected an array");
                } else {
                    for (std::size_t i = 0; i < terms->size(); ++i) {
                        f.terms.push_back(
                            gaussian((*terms)[i], where + "/terms/" + std::to_string(i)));
                    }
                }
            }
        } else if (k == "raster") {
            f.kind = FieldKind::raster;
            if (auto* p = member(v, where, "path", true)) {
                f.path = text(*p, where + "/path");
                check_raster_file(f.path, where + "/path");
            }
            if (auto* s = member(v, where, "scale", false)) f.scale = number(*s, where + "/scale");
        } else if (k == "breakdown_arrival") {
            f.kind = FieldKind::breakdown_arrival;
        } else {
            fail(where + "/kind", "unknown field kind '" + k + "'");
        }
        return f;
    }

    ShapeSpec shape(const json& v, const std::string& where) {
        ShapeSpec s;
        const json* kind = member(v, where, "kind", true);
        if (!kind) return s;
        const std::string k = text(*kind, where + "/kind");
        if (k == "rectangle") {
            s.kind = ShapeKind::rectangle;
            if (auto* a = member(v, where, "min", true)) s.lower = point(*a, where + "/min");
            if (auto* b = member(v, where, "max", true)) s.upper = point(*b, where + "/max");
            check_unit_point(s.lower, where + "/min");
            check_unit_point(s.upper, where + "/max");
            if (s.lower[0] > s.upper[0] || s.lower[1] > s.upper[1]) {
                fail(where, "rectangle min must not exceed max");
            }
        } else if (k == "circle") {
            s.kind = ShapeKind::circle;
            if (auto* c = member(v, where, "center", true)) s.lower = point(*c, where + "/center");
            if (auto* r = member(v, where, "radius", true)) s.radius = number(*r, where + "/radius");
            check_unit_point(s.lower, where + "/center");
            if (!(s.radius > 0.0)) fail(where + "/radius", "must be positive");
        } else if (k == "raster_mask") {
            s.kind = ShapeKind::raster_mask;
            if (auto* p = member(v, where, "path", true)) {
                s.path = text(*p, where + "/path");
                check_raster_file(s.path, where + "/path");
            }
            if (auto* t = member(v, where, "threshold", false)) {
                s.threshold = number(*t, where + "/threshold");
            }
        } else {
            fail(where + "/kind", "unknown shape kind '" + k + "'");
        }
        return s;
    }

    std::vector<ShapeSpec> shapes(const json& v, const std::string& where) {
        std::vector<ShapeSpec> out;
        if (v.is_object()) {
            out.push_back(shape(v, where));
        } else if (v.is_array()) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                out.push_back(shape(v[i], where + "/" + std::to_string(i)));
            }
        } else {
            fail(where, "expected a shape or an array of shapes");
        }
        return out;
    }

    void nonnegative(const FieldSpec& f, const std::string& where) {
        if (f.kind == FieldKind::constant && f.value < 0.0) fail(where, "must be nonnegative");
        if (f.kind == FieldKind::raster && f.scale < 0.0) fail(where + "/scale", "must be nonnegative");
    }

    void positive(const FieldSpec& f, const std::string& where) {
        if (f.kind == FieldKind::constant && !(f.value > 0.0)) fail(where, "must be positive");
        if (f.kind == FieldKind::raster && !(f.scale > 0.0)) fail(where + "/scale", "must be positive");
    }

private:
    std::string base_dir_;
};

std::string locate(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

ScenarioSpec parse_scenario(const std::string& text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError("scenario is not valid JSON",
                         {locate(text, e.byte) + ": " + std::string(e.what())});
    }
    Reader r(base_dir);
    ScenarioSpec s;
    s.base_dir = base_dir;
    if (!doc.is_object()) throw InputError("scenario must be a JSON object");

    static const char* known[] = {"name", "grid", "time_units", "modes", "rates",
                                  "termination_rates", "speed", "broken_speed", "obstacles",
                                  "target", "solve", "initial_belief", "start", "seed"};
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known)) {
            r.fail("/" + it.key(), "unknown field");
        }
    }

    if (auto* v = r.member(doc, "", "name", false)) s.name = r.text(*v, "/name");
    if (auto* v = r.member(doc, "", "time_units", false)) s.time_units = r.text(*v, "/time_units");
    if (auto* g = r.member(doc, "", "grid", true)) {
        if (auto* j = r.member(*g, "/grid", "J", true)) s.subdivisions = r.integer(*j, "/grid/J");
        if (s.subdivisions < 2) r.fail("/grid/J", "must be at least 2");
    }

    if (auto* modes = r.member(doc, "", "modes", true)) {
        if (!modes->is_array() || modes->empty()) {
            r.fail("/modes", "expected a nonempty array");
        } else {
            for (std::size_t i = 0; i < modes->size(); ++i) {
                const std::string where = "/modes/" + std::to_string(i);
                const json& m = (*modes)[i];
                ModeSpec mode;
                if (auto* c = r.member(m, where, "cost", true)) {
                    mode.cost = r.field(*c, where + "/cost");
                    r.nonnegative(mode.cost, where + "/cost");
                }
                if (auto* t = r.member(m, where, "terminal", false)) {
                    mode.terminal = r.field(*t, where + "/terminal");
                    r.nonnegative(mode.terminal, where + "/terminal");
                }
                if (auto* p = r.member(m, where, "premature", false)) {
                    mode.premature = r.field(*p, where + "/premature");
                    r.nonnegative(*mode.premature, where + "/premature");
                }
                for (auto* f : {&mode.cost, &mode.terminal}) {
                    if (f->kind == FieldKind::breakdown_arrival) {
                        r.fail(where, "breakdown_arrival is only valid for premature costs");
                    }
                }
                s.modes.push_back(std::move(mode));
            }
        }
    }
    const int m = static_cast<int>(s.modes.size());

    if (auto* rates = r.member(doc, "", "rates", true)) {
        if (!rates->is_array() || static_cast<int>(rates->size()) != m) {
            r.fail("/rates", "expected " + std::to_string(m) + " rows");
        } else {
            for (int i = 0; i < m; ++i) {
                const json& row = (*rates)[i];
                const std::string where = "/rates/" + std::to_string(i);
                std::vector<double> values;
                if (!row.is_array() || static_cast<int>(row.size()) != m) {
                    r.fail(where, "expected " + std::to_string(m) + " entries");
                } else {
                    for (int j = 0; j < m; ++j) {
                        values.push_back(r.number(row[j], where + "/" + std::to_string(j)));
                    }
                }
                s.rates.push_back(values);
            }
        }
    }
    if (auto* g = r.member(doc, "", "termination_rates", false)) {
        if (!g->is_array() || static_cast<int>(g->size()) != m) {
            r.fail("/termination_rates", "expected " + std::to_string(m) + " entries");
        } else {
            for (int i = 0; i < m; ++i) {
                s.termination_rates.push_back(
                    r.number((*g)[i], "/termination_rates/" + std::to_string(i)));
            }
        }
    }
    const bool rates_shaped = static_cast<int>(s.rates.size()) == m && m > 0 &&
                              std::all_of(s.rates.begin(), s.rates.end(), [m](const auto& row) {
                                  return static_cast<int>(row.size()) == m;
                              });
    if (rates_shaped) {
        Eigen::MatrixXd lambda(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) lambda(i, j) = s.rates[i][j];
        Eigen::VectorXd gamma;
        if (static_cast<int>(s.termination_rates.size()) == m) {
            gamma = Eigen::Map<const Eigen::VectorXd>(s.termination_rates.data(), m);
        }
        try {
            ModeChain chain(lambda, gamma);
        } catch (const InputError& e) {
            for (const auto& d : e.details()) r.fail("/rates", d);
            if (e.details().empty()) r.fail("/rates", e.what());
        }
    }

    if (auto* v = r.member(doc, "", "speed", false)) {
        s.speed = r.field(*v, "/speed");
        r.positive(s.speed, "/speed");
    }
    if (auto* v = r.member(doc, "", "broken_speed", false)) {
        s.broken_speed = r.field(*v, "/broken_speed");
        r.positive(*s.broken_speed, "/broken_speed");
    }
    for (auto* f : {&s.speed}) {
        if (f->kind == FieldKind::breakdown_arrival) r.fail("/speed", "invalid kind for a speed");
    }
    if (auto* v = r.member(doc, "", "obstacles", false)) s.obstacles = r.shapes(*v, "/obstacles");
    if (auto* v = r.member(doc, "", "target", false)) s.target = r.shapes(*v, "/target");

    if (auto* sv = r.member(doc, "", "solve", true)) {
        SolveOptions& o = s.solve;
        if (auto* v = r.member(*sv, "/solve", "regime", true)) {
            const std::string name = r.text(*v, "/solve/regime");
            if (name == "finite") o.regime = Regime::finite;
            else if (name == "infinite_periodic") o.regime = Regime::infinite_periodic;
            else if (name == "indefinite") o.regime = Regime::indefinite;
            else if (name == "randomly_terminated") o.regime = Regime::randomly_terminated;
            else r.fail("/solve/regime", "unknown regime '" + name + "'");
        }
        if (auto* v = r.member(*sv, "/solve", "horizon", false)) o.horizon = r.number(*v, "/solve/horizon");
        if (auto* v = r.member(*sv, "/solve", "discount", false)) o.discount = r.number(*v, "/solve/discount");
        if (auto* v = r.member(*sv, "/solve", "tol", false)) o.tol = r.number(*v, "/solve/tol");
        if (auto* v = r.member(*sv, "/solve", "max_iters", false)) o.max_iters = r.integer(*v, "/solve/max_iters");
        if (auto* v = r.member(*sv, "/solve", "memory_budget_mb", false)) {
            o.memory_budget_mb = r.number(*v, "/solve/memory_budget_mb");
        }
        if (auto* v = r.member(*sv, "/solve", "fully_observed", false)) {
            if (!v->is_boolean()) r.fail("/solve/fully_observed", "expected a boolean");
            else o.fully_observed = v->get<bool>();
        }
        if (auto* ob = r.member(*sv, "/solve", "observations", false)) {
            const std::string where = "/solve/observations";
            if (auto* k = r.member(*ob, where, "kind", true)) {
                const std::string name = r.text(*k, where + "/kind");
                if (name == "none") {
                    o.observations.kind = ObservationKind::none;
                } else if (name == "scheduled") {
                    o.observations.kind = ObservationKind::scheduled;
                    if (auto* t = r.member(*ob, where, "times", true)) {
                        if (!t->is_array()) r.fail(where + "/times", "expected an array");
                        else
                            for (std::size_t i = 0; i < t->size(); ++i)
                                o.observations.times.push_back(
                                    r.number((*t)[i], where + "/times/" + std::to_string(i)));
                    }
                } else if (name == "bounded") {
                    o.observations.kind = ObservationKind::bounded;
                    if (auto* c = r.member(*ob, where, "count", true)) {
                        o.observations.count = r.integer(*c, where + "/count");
                    }
                } else if (name == "paid") {
                    o.observations.kind = ObservationKind::paid;
                    if (auto* c = r.member(*ob, where, "cost", true)) {
                        o.observations.cost = r.field(*c, where + "/cost");
                        r.positive(o.observations.cost, where + "/cost");
                    }
                } else {
                    r.fail(where + "/kind", "unknown observation kind '" + name + "'");
                }
            }
        }

        if (!(o.tol > 0.0)) r.fail("/solve/tol", "must be positive");
        if (o.max_iters < 1) r.fail("/solve/max_iters", "must be at least 1");
        if (!(o.memory_budget_mb > 0.0)) r.fail("/solve/memory_budget_mb", "must be positive");
        if (o.horizon && !(*o.horizon > 0.0)) r.fail("/solve/horizon", "must be positive");
        const auto kind = o.observations.kind;
        switch (o.regime) {
            case Regime::finite:
                if (!o.horizon) r.fail("/solve/horizon", "finite regime needs a horizon");
                if (kind != ObservationKind::none && kind != ObservationKind::scheduled) {
                    r.fail("/solve/observations", "finite regime supports none or scheduled");
                }
                break;
            case Regime::infinite_periodic:
                if (!o.horizon) r.fail("/solve/horizon", "periodic regime needs the period");
                if (!(o.discount > 0.0)) r.fail("/solve/discount", "must be positive");
                if (kind != ObservationKind::none) {
                    r.fail("/solve/observations", "periodic observations are implied by the regime");
                }
                break;
            case Regime::indefinite:
            case Regime::randomly_terminated:
                if (kind == ObservationKind::scheduled) {
                    r.fail("/solve/observations", "scheduled observations need the finite regime");
                }
                if (s.target.empty()) r.fail("/target", "indefinite regimes need a target");
                break;
        }
        if (o.regime == Regime::randomly_terminated) {
            if (s.termination_rates.empty()) {
                r.fail("/termination_rates", "randomly terminated regime needs termination rates");
            }
            for (int i = 0; i < m; ++i) {
                if (!s.modes[i].premature) {
                    r.fail("/modes/" + std::to_string(i) + "/premature",
                           "randomly terminated regime needs premature costs");
                }
            }
        } else if (std::any_of(s.termination_rates.begin(), s.termination_rates.end(),
                               [](double g) { return g != 0.0; })) {
            r.fail("/termination_rates", "nonzero termination rates need the randomly_terminated regime");
        }
        for (int i = 0; i < m; ++i) {
            if (s.modes[i].premature && s.modes[i].premature->kind == FieldKind::breakdown_arrival &&
                !s.broken_speed) {
                r.fail("/modes/" + std::to_string(i) + "/premature",
                       "breakdown_arrival needs broken_speed");
            }
        }
        if (kind == ObservationKind::scheduled) {
            const auto& t = o.observations.times;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const std::string where = "/solve/observations/times/" + std::to_string(i);
                if (!(t[i] > 0.0) || (o.horizon && t[i] > *o.horizon)) {
                    r.fail(where, "must lie in (0, horizon]");
                }
                if (i > 0 && !(t[i] > t[i - 1])) r.fail(where, "times must be strictly increasing");
            }
        }
        if (kind == ObservationKind::bounded && o.observations.count < 0) {
            r.fail("/solve/observations/count", "must be nonnegative");
        }
    }

    if (auto* b = r.member(doc, "", "initial_belief", false)) {
        InitialBelief& ib = s.initial_belief;
        if (b->is_string()) {
            if (b->get<std::string>() == "stationary") ib.kind = BeliefKind::stationary;
            else r.fail("/initial_belief", "expected \"stationary\", {mode} or {distribution}");
        } else if (b->is_object() && b->contains("mode")) {
            ib.kind = BeliefKind::mode;
            ib.mode = r.integer((*b)["mode"], "/initial_belief/mode");
            if (ib.mode < 0 || ib.mode >= m) r.fail("/initial_belief/mode", "mode index out of range");
        } else if (b->is_object() && b->contains("distribution")) {
            ib.kind = BeliefKind::distribution;
            const json& d = (*b)["distribution"];
            if (!d.is_array() || static_cast<int>(d.size()) != m) {
                r.fail("/initial_belief/distribution", "expected " + std::to_string(m) + " entries");
            } else {
                for (int i = 0; i < m; ++i) {
                    ib.distribution.push_back(
                        r.number(d[i], "/initial_belief/distribution/" + std::to_string(i)));
                }
                try {
                    require_distribution(
                        Eigen::Map<const Eigen::VectorXd>(ib.distribution.data(), m), m,
                        "initial belief");
                } catch (const InputError& e) {
                    r.fail("/initial_belief/distribution", e.what());
                }
            }
        } else {
            r.fail("/initial_belief", "expected \"stationary\", {mode} or {distribution}");
        }
    }
    if (auto* v = r.member(doc, "", "start", false)) {
        s.start = r.point(*v, "/start");
        r.check_unit_point(*s.start, "/start");
    }
    if (auto* v = r.member(doc, "", "seed", false)) {
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
            r.fail("/seed", "expected a nonnegative integer");
        } else {
            s.seed = v->get<std::uint64_t>();
        }
    }

    if (!r.problems.empty()) {
        throw InputError("invalid scenario (" + std::to_string(r.problems.size()) + " problem" +
                             (r.problems.size() == 1 ? "" : "s") + ")",
                         r.problems);
    }
    return s;
}

ScenarioSpec load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scenario " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path().string();
    return parse_scenario(buffer.str(), dir.empty() ? "." : dir);
}

namespace {

ordered_json write_point(const Point2& p) { return ordered_json::array({p[0], p[1]}); }

ordered_json write_field(const FieldSpec& f) {
    ordered_json j;
    switch (f.kind) {
        case FieldKind::constant:
            j["kind"] = "constant";
            j["value"] = f.value;
            break;
        case FieldKind::gaussian_sum: {
            j["kind"] = "gaussian_sum";
            j["base"] = f.value;
            ordered_json terms = ordered_json::array();
            for (const auto& t : f.terms) {
                ordered_json term;
                term["amplitude"] = t.amplitude;
                term["center"] = write_point(t.center);
                if (t.sigma) term["sigma"] = *t.sigma;
                if (t.covariance) {
                    const auto& c = *t.covariance;
                    term["covariance"] = ordered_json::array(
                        {ordered_json::array({c[0], c[1]}), ordered_json::array({c[1], c[2]})});
                }
                term["normalization"] = t.norm == GaussianNorm::none           ? "none"
                                        : t.norm == GaussianNorm::two_pi_sigma ? "2pi_sigma"
                                                                               : "2pi_sqrt_det";
                terms.push_back(term);
            }
            j["terms"] = terms;
            break;
        }
        case FieldKind::raster:
            j["kind"] = "raster";
            j["path"] = f.path;
            j["scale"] = f.scale;
            break;
        case FieldKind::breakdown_arrival:
            j["kind"] = "breakdown_arrival";
            break;
    }
    return j;
}

ordered_json write_shape(const ShapeSpec& s) {
    ordered_json j;
    switch (s.kind) {
        case ShapeKind::rectangle:
            j["kind"] = "rectangle";
            j["min"] = write_point(s.lower);
            j["max"] = write_point(s.upper);
            break;
        case ShapeKind::circle:
            j["kind"] = "circle";
            j["center"] = write_point(s.lower);
            j["radius"] = s.radius;
            break;
        case ShapeKind::raster_mask:
            j["kind"] = "raster_mask";
            j["path"] = s.path;
            j["threshold"] = s.threshold;
            break;
    }
    return j;
}

}  // namespace

std::string serialize_scenario(const ScenarioSpec& s) {
    ordered_json j;
    j["name"] = s.name;
    j["time_units"] = s.time_units;
    j["grid"] = {{"J", s.subdivisions}};
    ordered_json modes = ordered_json::array();
    for (const auto& m : s.modes) {
        ordered_json mode;
        mode["cost"] = write_field(m.cost);
        mode["terminal"] = write_field(m.terminal);
        if (m.premature) mode["premature"] = write_field(*m.premature);
        modes.push_back(mode);
    }
    j["modes"] = modes;
    j["rates"] = s.rates;
    if (!s.termination_rates.empty()) j["termination_rates"] = s.termination_rates;
    j["speed"] = write_field(s.speed);
    if (s.broken_speed) j["broken_speed"] = write_field(*s.broken_speed);
    ordered_json obstacles = ordered_json::array();
    for (const auto& o : s.obstacles) obstacles.push_back(write_shape(o));
    j["obstacles"] = obstacles;
    ordered_json target = ordered_json::array();
    for (const auto& t : s.target) target.push_back(write_shape(t));
    j["target"] = target;

    ordered_json solve;
    solve["regime"] = to_string(s.solve.regime);
    if (s.solve.horizon) solve["horizon"] = *s.solve.horizon;
    solve["discount"] = s.solve.discount;
    solve["tol"] = s.solve.tol;
    solve["max_iters"] = s.solve.max_iters;
    solve["fully_observed"] = s.solve.fully_observed;
    solve["memory_budget_mb"] = s.solve.memory_budget_mb;
    ordered_json obs;
    obs["kind"] = to_string(s.solve.observations.kind);
    switch (s.solve.observations.kind) {
        case ObservationKind::scheduled: obs["times"] = s.solve.observations.times; break;
        case ObservationKind::bounded: obs["count"] = s.solve.observations.count; break;
        case ObservationKind::paid: obs["cost"] = write_field(s.solve.observations.cost); break;
        case ObservationKind::none: break;
    }
    solve["observations"] = obs;
    j["solve"] = solve;

    switch (s.initial_belief.kind) {
        case BeliefKind::mode: j["initial_belief"] = {{"mode", s.initial_belief.mode}}; break;
        case BeliefKind::distribution:
            j["initial_belief"] = {{"distribution", s.initial_belief.distribution}};
            break;
        case BeliefKind::stationary: j["initial_belief"] = "stationary"; break;
    }
    if (s.start) j["start"] = write_point(*s.start);
    j["seed"] = s.seed;
    return j.dump(2) + "\n";
}

Problem build_problem(const ScenarioSpec& spec) {
    auto resolved_shapes = [&](std::vector<ShapeSpec> shapes) {
        for (auto& s : shapes) {
            if (s.kind == ShapeKind::raster_mask) s.path = resolve_path(spec.base_dir, s.path);
        }
        return shapes;
    };
    auto resolved = [&](FieldSpec f) {
        if (f.kind == FieldKind::raster) f.path = resolve_path(spec.base_dir, f.path);
        return f;
    };
    const int j = spec.subdivisions;
    Grid2D grid(j, rasterize_shapes(resolved_shapes(spec.obstacles), j),
                rasterize_shapes(resolved_shapes(spec.target), j));
    std::vector<std::string> problems;
    if (!spec.target.empty() && !grid.has_target()) {
        problems.push_back("/target: no gridpoint of the target lies outside obstacles at J=" +
                           std::to_string(j));
    }

    auto check_field = [&](const Slice& s, const std::string& where, bool strictly) {
        for (std::size_t p = 0; p < s.size(); ++p) {
            if (grid.kind(p) == PointKind::obstacle) continue;
            if (!std::isfinite(s[p]) || s[p] < 0.0 || (strictly && s[p] == 0.0)) {
                problems.push_back(where + ": invalid value " + std::to_string(s[p]) +
                                   " at gridpoint " + std::to_string(p));
                return;
            }
        }
    };

    Slice speed_values = rasterize_field(resolved(spec.speed), grid);
    check_field(speed_values, "/speed", true);
    std::optional<Slice> broken_values;
    if (spec.broken_speed) {
        broken_values = rasterize_field(resolved(*spec.broken_speed), grid);
        check_field(*broken_values, "/broken_speed", true);
    }

    const int m = static_cast<int>(spec.modes.size());
    Eigen::MatrixXd lambda(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) lambda(a, b) = spec.rates[a][b];
    Eigen::VectorXd gamma;
    if (!spec.termination_rates.empty()) {
        gamma = Eigen::Map<const Eigen::VectorXd>(spec.termination_rates.data(), m);
    }
    ModeChain chain(lambda, gamma);

    CostBundle costs;
    for (int i = 0; i < m; ++i) {
        const std::string where = "/modes/" + std::to_string(i);
        costs.running.push_back(rasterize_field(resolved(spec.modes[i].cost), grid));
        check_field(costs.running.back(), where + "/cost", false);
        costs.terminal.push_back(rasterize_field(resolved(spec.modes[i].terminal), grid));
        check_field(costs.terminal.back(), where + "/terminal", false);
    }
    if (!problems.empty()) throw InputError("invalid scenario fields", problems);

    std::optional<SpeedField> broken;
    if (broken_values) broken.emplace(grid, *broken_values);
    bool any_premature = false;
    for (int i = 0; i < m; ++i) any_premature = any_premature || spec.modes[i].premature.has_value();
    if (any_premature) {
        std::optional<Slice> arrival;
        for (int i = 0; i < m; ++i) {
            const auto& p = spec.modes[i].premature;
            if (!p) {
                costs.premature.push_back(Slice(grid.size(), 0.0));
            } else if (p->kind == FieldKind::breakdown_arrival) {
                if (!arrival) arrival = solve_breakdown_cost(grid, *broken).values;
                costs.premature.push_back(*arrival);
            } else {
                costs.premature.push_back(rasterize_field(resolved(*p), grid));
                check_field(costs.premature.back(), "/modes/" + std::to_string(i) + "/premature",
                            false);
            }
        }
    }
    Slice observation_cost;
    if (spec.solve.observations.kind == ObservationKind::paid) {
        observation_cost = rasterize_field(resolved(spec.solve.observations.cost), grid);
        check_field(observation_cost, "/solve/observations/cost", true);
    }
    if (!problems.empty()) throw InputError("invalid scenario fields", problems);

    Distribution initial;
    switch (spec.initial_belief.kind) {
        case BeliefKind::mode: initial = basis_belief(m, spec.initial_belief.mode); break;
        case BeliefKind::distribution:
            initial = Eigen::Map<const Eigen::VectorXd>(spec.initial_belief.distribution.data(), m);
            initial /= initial.sum();
            break;
        case BeliefKind::stationary:
            initial = chain.has_termination() ? quasi_stationary_distribution(chain)
                                              : stationary_distribution(chain);
            break;
    }
    if (spec.start) {
        const double h = grid.spacing();
        const int i = static_cast<int>(std::lround((*spec.start)[0] / h));
        const int jj = static_cast<int>(std::lround((*spec.start)[1] / h));
        if (grid.kind(i, jj) == PointKind::obstacle) {
            throw InputError("invalid scenario fields", {"/start: lies inside an obstacle"});
        }
    }

    SpeedField speed(grid, std::move(speed_values));
    return Problem{spec, std::move(grid), std::move(speed), std::move(broken),
                   std::move(chain), std::move(costs), std::move(observation_cost),
                   std::move(initial)};
}

}  // namespace oopdmp
