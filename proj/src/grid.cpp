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

#include "oopdmp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace oopdmp {

Grid2D::Grid2D(int subdivisions)
    : Grid2D(subdivisions,
             std::vector<std::uint8_t>(static_cast<std::size_t>(subdivisions + 1) *
                                           static_cast<std::size_t>(subdivisions + 1),
                                       0),
             std::vector<std::uint8_t>(static_cast<std::size_t>(subdivisions + 1) *
                                           static_cast<std::size_t>(subdivisions + 1),
                                       0)) {}

Grid2D::Grid2D(int subdivisions, const std::vector<std::uint8_t>& obstacle,
               const std::vector<std::uint8_t>& target)
    : j_(subdivisions), h_(subdivisions > 0 ? 1.0 / subdivisions : 0.0) {
    if (subdivisions < 1) throw InputError("grid needs at least one subdivision");
    const std::size_t n = static_cast<std::size_t>(side()) * static_cast<std::size_t>(side());
    if (obstacle.size() != n || target.size() != n) {
        throw InputError("grid mask size does not match (J+1)^2");
    }
    kinds_.assign(n, PointKind::free);
    auto is_target = [&](int i, int j) {
        const std::size_t p = index(i, j);
        return target[p] != 0 && obstacle[p] == 0;
    };
    for (int j = 0; j <= j_; ++j) {
        for (int i = 0; i <= j_; ++i) {
            const std::size_t p = index(i, j);
            if (obstacle[p]) {
                kinds_[p] = PointKind::obstacle;
            } else if (target[p]) {
                bool edge = false;
                const int di[4] = {1, -1, 0, 0};
                const int dj[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    const int ni = i + di[d];
                    const int nj = j + dj[d];
                    if (ni < 0 || nj < 0 || ni > j_ || nj > j_) continue;
                    if (!is_target(ni, nj)) edge = true;
                }
                kinds_[p] = edge ? PointKind::target_boundary : PointKind::target_interior;
                if (edge) ++boundary_count_;
            }
        }
    }
}

SpeedField::SpeedField(const Grid2D& grid, Slice values) : f_(std::move(values)) {
    if (f_.size() != grid.size()) throw InputError("speed field size does not match the grid");
    f_max_ = 0.0;
    f_min_ = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < f_.size(); ++p) {
        if (grid.kind(p) == PointKind::obstacle) continue;
        if (!std::isfinite(f_[p]) || f_[p] <= 0.0) {
            std::ostringstream msg;
            msg << "speed must be positive and finite outside obstacles (found " << f_[p]
                << " at gridpoint " << p << ")";
            throw InputError(msg.str());
        }
        f_max_ = std::max(f_max_, f_[p]);
        f_min_ = std::min(f_min_, f_[p]);
    }
    if (f_max_ == 0.0) f_min_ = 0.0;
}

TimeStep cfl_timestep(const Grid2D& grid, const SpeedField& speed, double t_end,
                      double extra_rate) {
    if (!(t_end > 0.0)) throw InputError("cfl_timestep: t_end must be positive");
    if (!(speed.max() > 0.0)) throw InputError("cfl_timestep: maximum speed must be positive");
    if (!(extra_rate >= 0.0)) throw InputError("cfl_timestep: extra rate must be nonnegative");
    const double dt_max = 1.0 / (std::sqrt(2.0) * speed.max() / grid.spacing() + extra_rate);
    const double ratio = t_end / dt_max;
    // Absorb rounding so exactly divisible horizons keep dt = dt_max.
    const int steps = std::max(1, static_cast<int>(std::ceil(ratio * (1.0 - 1e-12))));
    return {t_end / steps, steps};
}

namespace {

inline double neighbour(std::span<const double> v, const Grid2D& g, int i, int j) {
    if (i < 0 || j < 0 || i > g.subdivisions() || j > g.subdivisions()) return kInfinity;
    return v[g.index(i, j)];
}

inline double axis_slope(double centre, double minus, double plus, double h) {
    const double d = std::min(plus - centre, minus - centre) / h;
    return d < 0.0 ? d : 0.0;
}

}  // namespace

double upwind_gradient_norm(std::span<const double> slice, const Grid2D& grid, int i, int j) {
    const double v = slice[grid.index(i, j)];
    const double h = grid.spacing();
    const double dx = axis_slope(v, neighbour(slice, grid, i - 1, j),
                                 neighbour(slice, grid, i + 1, j), h);
    const double dy = axis_slope(v, neighbour(slice, grid, i, j - 1),
                                 neighbour(slice, grid, i, j + 1), h);
    return std::sqrt(dx * dx + dy * dy);
}

void explicit_update(std::span<const double> current, const Grid2D& grid, const SpeedField& speed,
                     std::span<const double> kbar, double dt, std::span<double> next,
                     const ZerothOrder* zeroth) {
    const int side = grid.side();
    const double h = grid.spacing();
    const auto& kinds = grid.kinds();
    const auto& f = speed.values();
#pragma omp parallel for schedule(static)
    for (int j = 0; j < side; ++j) {
        for (int i = 0; i < side; ++i) {
            const std::size_t p = grid.index(i, j);
            const PointKind k = kinds[p];
            if (k == PointKind::obstacle || k == PointKind::target_interior) {
                next[p] = kInfinity;
                continue;
            }
            const double v = current[p];
            const double west = i > 0 ? current[p - 1] : kInfinity;
            const double east = i < side - 1 ? current[p + 1] : kInfinity;
            const double south = j > 0 ? current[p - side] : kInfinity;
            const double north = j < side - 1 ? current[p + side] : kInfinity;
            const double dx = axis_slope(v, west, east, h);
            const double dy = axis_slope(v, south, north, h);
            double out = v + dt * (kbar[p] - f[p] * std::sqrt(dx * dx + dy * dy));
            if (zeroth != nullptr) out = out + dt * zeroth->rate[p] * (zeroth->reward[p] - v);
            next[p] = out < kInfinity ? out : kInfinity;
        }
    }
}

ValueField::ValueField(std::size_t points, int steps, double dt, int stride)
    : points_(points), steps_(steps), dt_(dt), stride_(std::max(1, stride)) {
    if (steps < 0) throw InputError("value field needs a nonnegative step count");
    position_.assign(static_cast<std::size_t>(steps) + 1, -1);
    for (int k = 0; k <= steps; ++k) {
        if (k == 0 || k == 1 || k == steps || k % stride_ == 0) {
            position_[static_cast<std::size_t>(k)] = static_cast<int>(retained_.size());
            retained_.push_back(k);
        }
    }
    data_.assign(retained_.size() * points_, kInfinity);
}

std::span<double> ValueField::slice(int k) {
    if (!retains(k)) throw InputError("value slice " + std::to_string(k) + " is not stored");
    return {data_.data() + static_cast<std::size_t>(position_[k]) * points_, points_};
}

std::span<const double> ValueField::slice(int k) const {
    if (!retains(k)) throw InputError("value slice " + std::to_string(k) + " is not stored");
    return {data_.data() + static_cast<std::size_t>(position_[k]) * points_, points_};
}

double ValueField::sample(std::size_t p, double t) const {
    if (steps_ == 0 || dt_ <= 0.0) return data_[p];
    const double kf = std::clamp(t / dt_, 0.0, static_cast<double>(steps_));
    auto it = std::upper_bound(retained_.begin(), retained_.end(), static_cast<int>(kf));
    const int hi_pos = static_cast<int>(it - retained_.begin());
    const int lo_pos = hi_pos - 1;
    const int k_lo = retained_[static_cast<std::size_t>(lo_pos)];
    const double v_lo = data_[static_cast<std::size_t>(lo_pos) * points_ + p];
    if (it == retained_.end() || kf == k_lo) return v_lo;
    const int k_hi = *it;
    const double v_hi = data_[static_cast<std::size_t>(hi_pos) * points_ + p];
    const double w = (kf - k_lo) / (k_hi - k_lo);
    return clamp_sentinel(v_lo + w * (v_hi - v_lo));
}

double ValueField::sample(const Grid2D& grid, double x, double y, double t) const {
    const int n = grid.subdivisions();
    const double gx = std::clamp(x / grid.spacing(), 0.0, static_cast<double>(n));
    const double gy = std::clamp(y / grid.spacing(), 0.0, static_cast<double>(n));
    const int i0 = std::min(static_cast<int>(gx), n - 1);
    const int j0 = std::min(static_cast<int>(gy), n - 1);
    const double u = gx - i0;
    const double w = gy - j0;
    const double v00 = sample(grid.index(i0, j0), t);
    const double v10 = sample(grid.index(i0 + 1, j0), t);
    const double v01 = sample(grid.index(i0, j0 + 1), t);
    const double v11 = sample(grid.index(i0 + 1, j0 + 1), t);
    return clamp_sentinel((1 - u) * (1 - w) * v00 + u * (1 - w) * v10 + (1 - u) * w * v01 +
                          u * w * v11);
}

std::size_t ValueField::bytes_for(std::size_t points, int steps, int stride) {
    std::size_t count = 0;
    for (int k = 0; k <= steps; ++k) {
        if (k == 0 || k == 1 || k == steps || k % stride == 0) ++count;
    }
    return count * points * sizeof(double);
}

double interpolate(const Grid2D& grid, std::span<const double> slice, double x, double y) {
    const int n = grid.subdivisions();
    const double gx = std::clamp(x / grid.spacing(), 0.0, static_cast<double>(n));
    const double gy = std::clamp(y / grid.spacing(), 0.0, static_cast<double>(n));
    const int i0 = std::min(static_cast<int>(gx), n - 1);
    const int j0 = std::min(static_cast<int>(gy), n - 1);
    const double u = gx - i0;
    const double w = gy - j0;
    return clamp_sentinel((1 - u) * (1 - w) * slice[grid.index(i0, j0)] +
                          u * (1 - w) * slice[grid.index(i0 + 1, j0)] +
                          (1 - u) * w * slice[grid.index(i0, j0 + 1)] +
                          u * w * slice[grid.index(i0 + 1, j0 + 1)]);
}

}  // namespace oopdmp
