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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "oopdmp/core.hpp"

namespace oopdmp {

enum class PointKind : std::uint8_t { free, obstacle, target_interior, target_boundary };

/// Uniform (J+1)x(J+1) grid on the unit square with obstacle and target masks.
class Grid2D {
public:
    /// Grid without obstacles or target.
    explicit Grid2D(int subdivisions);

    /// Masks are indexed like slices. Obstacles take precedence over target
    /// points; target points with at least one non-target 4-neighbour form
    /// the target boundary.
    Grid2D(int subdivisions, const std::vector<std::uint8_t>& obstacle,
           const std::vector<std::uint8_t>& target);

    int subdivisions() const noexcept { return j_; }
    int side() const noexcept { return j_ + 1; }
    std::size_t size() const noexcept { return kinds_.size(); }
    double spacing() const noexcept { return h_; }
    double coord(int i) const noexcept { return i * h_; }

    std::size_t index(int i, int j) const noexcept {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(side()) +
               static_cast<std::size_t>(i);
    }

    PointKind kind(std::size_t p) const noexcept { return kinds_[p]; }
    PointKind kind(int i, int j) const noexcept { return kinds_[index(i, j)]; }
    const std::vector<PointKind>& kinds() const noexcept { return kinds_; }

    /// Points whose value is evolved by the marching kernel.
    bool active(std::size_t p) const noexcept {
        return kinds_[p] == PointKind::free || kinds_[p] == PointKind::target_boundary;
    }
    bool in_target(std::size_t p) const noexcept {
        return kinds_[p] == PointKind::target_interior || kinds_[p] == PointKind::target_boundary;
    }
    bool has_target() const noexcept { return boundary_count_ > 0; }
    std::size_t target_boundary_count() const noexcept { return boundary_count_; }

private:
    int j_;
    double h_;
    std::vector<PointKind> kinds_;
    std::size_t boundary_count_ = 0;
};

/// Isotropic speed per gridpoint.
class SpeedField {
public:
    /// Throws InputError when a non-obstacle point has non-positive or
    /// non-finite speed.
    SpeedField(const Grid2D& grid, Slice values);

    double operator[](std::size_t p) const noexcept { return f_[p]; }
    const Slice& values() const noexcept { return f_; }
    double max() const noexcept { return f_max_; }
    double min() const noexcept { return f_min_; }

private:
    Slice f_;
    double f_max_ = 0.0;
    double f_min_ = 0.0;
};

struct TimeStep {
    double dt;
    int steps;
};

/// Largest uniform step on [0, t_end] keeping the explicit scheme monotone:
/// dt <= 1 / (sqrt(2) f_max / h + extra_rate).
TimeStep cfl_timestep(const Grid2D& grid, const SpeedField& speed, double t_end,
                      double extra_rate);

/// sqrt(Dx^2 + Dy^2) with Dx = min(D+x, -D-x, 0). Neighbours outside the grid
/// count as the sentinel.
double upwind_gradient_norm(std::span<const double> slice, const Grid2D& grid, int i, int j);

/// Optional zeroth-order term dt * rate * (reward - V).
struct ZerothOrder {
    std::span<const double> rate;
    std::span<const double> reward;
};

/// One explicit backward step: next = V + dt (kbar - f |grad V|) [+ zeroth].
/// Obstacle and target-interior points are written as the sentinel; every
/// result is clamped to the sentinel.
void explicit_update(std::span<const double> current, const Grid2D& grid, const SpeedField& speed,
                     std::span<const double> kbar, double dt, std::span<double> next,
                     const ZerothOrder* zeroth = nullptr);

/// Time-sliced value function V(x, t_k), t_k = k dt, k = 0..N. Only a subset
/// of slices is stored: 0, 1, N and every multiple of the stride. Sampling
/// between stored slices is linear in time.
class ValueField {
public:
    ValueField() = default;
    ValueField(std::size_t points, int steps, double dt, int stride = 1);

    std::size_t points() const noexcept { return points_; }
    int steps() const noexcept { return steps_; }
    double dt() const noexcept { return dt_; }
    double horizon() const noexcept { return steps_ * dt_; }
    int stride() const noexcept { return stride_; }

    bool retains(int k) const noexcept {
        return k >= 0 && k <= steps_ && position_[static_cast<std::size_t>(k)] >= 0;
    }
    const std::vector<int>& retained() const noexcept { return retained_; }

    std::span<double> slice(int k);
    std::span<const double> slice(int k) const;

    /// Value at gridpoint p and time t (clamped into [0, horizon]).
    double sample(std::size_t p, double t) const;

    /// Bilinear in space, linear in time.
    double sample(const Grid2D& grid, double x, double y, double t) const;

    /// Bytes needed to store a field with the given retention.
    static std::size_t bytes_for(std::size_t points, int steps, int stride);

private:
    std::size_t points_ = 0;
    int steps_ = 0;
    double dt_ = 0.0;
    int stride_ = 1;
    std::vector<int> position_;
    std::vector<int> retained_;
    std::vector<double> data_;
};

/// Bilinear interpolation of a single slice at a continuous position.
double interpolate(const Grid2D& grid, std::span<const double> slice, double x, double y);

}  // namespace oopdmp
