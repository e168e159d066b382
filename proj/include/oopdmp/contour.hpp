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

#include <span>
#include <vector>

#include "oopdmp/fields.hpp"
#include "oopdmp/grid.hpp"

namespace oopdmp {

struct Segment {
    Point2 a;
    Point2 b;
};

/// Marching-squares level set {g = level} of a gridpoint slice. Cells with a
/// sentinel corner are skipped; saddles are resolved by the cell average.
std::vector<Segment> contour_segments(const Grid2D& grid, std::span<const double> values,
                                      double level);

}  // namespace oopdmp
