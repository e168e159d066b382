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

#include "oopdmp/contour.hpp"

namespace oopdmp {

namespace {

Point2 crossing(Point2 p, Point2 q, double vp, double vq, double level) {
    const double w = (level - vp) / (vq - vp);
    return {p[0] + w * (q[0] - p[0]), p[1] + w * (q[1] - p[1])};
}

}  // namespace

std::vector<Segment> contour_segments(const Grid2D& grid, std::span<const double> values,
                                      double level) {
    std::vector<Segment> out;
    const int n = grid.subdivisions();
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            // Corners counter-clockwise from the lower left.
            const Point2 c[4] = {{grid.coord(i), grid.coord(j)},
                                 {grid.coord(i + 1), grid.coord(j)},
                                 {grid.coord(i + 1), grid.coord(j + 1)},
                                 {grid.coord(i), grid.coord(j + 1)}};
            const double v[4] = {values[grid.index(i, j)], values[grid.index(i + 1, j)],
                                 values[grid.index(i + 1, j + 1)], values[grid.index(i, j + 1)]};
            if (is_sentinel(v[0]) || is_sentinel(v[1]) || is_sentinel(v[2]) || is_sentinel(v[3])) {
                continue;
            }
            int mask = 0;
            for (int k = 0; k < 4; ++k) {
                if (v[k] < level) mask |= 1 << k;
            }
            if (mask == 0 || mask == 15) continue;
            auto edge = [&](int e) {
                const int a = e;
                const int b = (e + 1) % 4;
                return crossing(c[a], c[b], v[a], v[b], level);
            };
            // Edges crossed: edge e joins corner e and e+1.
            std::vector<int> crossed;
            for (int e = 0; e < 4; ++e) {
                const bool below_a = (mask >> e) & 1;
                const bool below_b = (mask >> ((e + 1) % 4)) & 1;
                if (below_a != below_b) crossed.push_back(e);
            }
            if (crossed.size() == 2) {
                out.push_back({edge(crossed[0]), edge(crossed[1])});
                continue;
            }
            // Saddle: four crossings.
            const double centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
            const bool centre_below = centre < level;
            const bool corner0_below = mask & 1;
            if (centre_below == corner0_below) {
                out.push_back({edge(0), edge(1)});
                out.push_back({edge(2), edge(3)});
            } else {
                out.push_back({edge(3), edge(0)});
                out.push_back({edge(1), edge(2)});
            }
        }
    }
    return out;
}

}  // namespace oopdmp
