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

#include <cstdint>
#include <vector>

#include "oopdmp/core.hpp"
#include "oopdmp/grid.hpp"

namespace oopdmp {

/// First-arrival field: 0 on the target, sentinel where unreachable.
struct ArrivalField {
    Slice values;
    std::vector<std::uint8_t> frozen;

    /// Largest finite value.
    double max_finite() const;
};

/// Fast Marching solve of f |grad z| = 1 with z = 0 on the target.
ArrivalField solve_min_time(const Grid2D& grid, const SpeedField& speed);

/// Cost of reaching the target after a breakdown: f_b |grad phi| = 1.
ArrivalField solve_breakdown_cost(const Grid2D& grid, const SpeedField& broken_speed);

/// Upper bound on the time any optimal trajectory spends before reaching the
/// target: max z * K_max / K_min + psi_max / K_min.
double horizon_bound(const ArrivalField& z, double k_min, double k_max, double psi_max);

}  // namespace oopdmp
