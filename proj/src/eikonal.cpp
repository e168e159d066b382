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

#include "oopdmp/eikonal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <utility>

namespace oopdmp {

double ArrivalField::max_finite() const {
    double m = 0.0;
    for (double v : values) {
        if (!is_sentinel(v)) m = std::max(m, v);
    }
    return m;
}

namespace {

// Two-point upwind update; a and b are the smallest frozen neighbours along
// each axis (sentinel when none).
double quadratic_update(double a, double b, double s) {
    if (a > b) std::swap(a, b);
    if (is_sentinel(b) || b - a >= s) return a + s;
    const double d = a - b;
    return 0.5 * (a + b + std::sqrt(2.0 * s * s - d * d));
}

}  // namespace

ArrivalField solve_min_time(const Grid2D& grid, const SpeedField& speed) {
    if (!grid.has_target()) throw InputError("eikonal solve needs a nonempty target");
    const std::size_t n = grid.size();
    const int side = grid.side();
    const double h = grid.spacing();
    ArrivalField z{Slice(n, kInfinity), std::vector<std::uint8_t>(n, 0)};

    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (std::size_t p = 0; p < n; ++p) {
        if (grid.in_target(p)) {
            z.values[p] = 0.0;
            z.frozen[p] = 1;
        }
    }
    auto frozen_value = [&](int i, int j) {
        if (i < 0 || j < 0 || i >= side || j >= side) return kInfinity;
        const std::size_t q = grid.index(i, j);
        return z.frozen[q] ? z.values[q] : kInfinity;
    };
    auto relax = [&](int i, int j) {
        if (i < 0 || j < 0 || i >= side || j >= side) return;
        const std::size_t p = grid.index(i, j);
        if (z.frozen[p] || grid.kind(p) != PointKind::free) return;
        const double a = std::min(frozen_value(i - 1, j), frozen_value(i + 1, j));
        const double b = std::min(frozen_value(i, j - 1), frozen_value(i, j + 1));
        const double candidate = quadratic_update(a, b, h / speed[p]);
        if (candidate < z.values[p]) {
            z.values[p] = candidate;
            heap.emplace(candidate, p);
        }
    };
    for (int j = 0; j < side; ++j) {
        for (int i = 0; i < side; ++i) {
            if (grid.kind(i, j) != PointKind::target_boundary) continue;
            relax(i + 1, j);
            relax(i - 1, j);
            relax(i, j + 1);
            relax(i, j - 1);
        }
    }
    while (!heap.empty()) {
        const auto [value, p] = heap.top();
        heap.pop();
        if (z.frozen[p] || value > z.values[p]) continue;
        z.frozen[p] = 1;
        const int i = static_cast<int>(p % static_cast<std::size_t>(side));
        const int j = static_cast<int>(p / static_cast<std::size_t>(side));
        relax(i + 1, j);
        relax(i - 1, j);
        relax(i, j + 1);
        relax(i, j - 1);
    }
    return z;
}

ArrivalField solve_breakdown_cost(const Grid2D& grid, const SpeedField& broken_speed) {
    return solve_min_time(grid, broken_speed);
}

double horizon_bound(const ArrivalField& z, double k_min, double k_max, double psi_max) {
    if (!(k_min > 0.0)) throw InputError("horizon bound needs a positive minimum running cost");
    if (k_max < k_min) throw InputError("horizon bound: K_max is below K_min");
    return z.max_finite() * k_max / k_min + psi_max / k_min;
}

}  // namespace oopdmp
